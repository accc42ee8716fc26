"""
Go source of the runtime edge recorder injected into instrumented workspaces.
"""

import json

RECORDER_PACKAGE = "flakytrace"
RECORDER_FILE = "recorder.go"
LOG_ENV_VAR = "FLAKY_EDGE_LOG"
ROOT_SENTINEL = ("-", 0, "-")
ERROR_SENTINEL = "RECORDER-ERROR"

_RECORDER_SOURCE = """// Code generated by flaky-mender; DO NOT EDIT.

// Package flakytrace appends one line per distinct call edge observed at runtime.
package flakytrace

import (
	"fmt"
	"os"
	"runtime"
	"strings"
	"sync"
)

const defaultLogPath = __LOG_PATH__

const selfPrefix = __SELF_PREFIX__

type site struct {
	file string
	line int
	name string
}

var (
	mu      sync.Mutex
	seen    = map[string]bool{}
	entered = map[string]site{}
	logFile *os.File
	broken  bool
)

func logPath() string {
	if p := os.Getenv("__LOG_ENV__"); p != "" {
		return p
	}
	return defaultLogPath
}

func skipFrame(frame runtime.Frame) bool {
	fn := frame.Function
	return fn == "" ||
		frame.File == "<autogenerated>" ||
		strings.HasPrefix(fn, "runtime.") ||
		strings.HasSuffix(fn, "-fm") ||
		strings.HasPrefix(fn, selfPrefix)
}

// Enter registers the instrumented function at (file, line) and records the
// edge from its nearest instrumented caller, or from the root sentinel.
//
//go:noinline
func Enter(file string, line int, name string) {
	pcs := make([]uintptr, 64)
	n := runtime.Callers(2, pcs)
	frames := runtime.CallersFrames(pcs[:n])
	callee, more := frames.Next()

	self := site{file, line, name}
	caller := site{"-", 0, "-"}

	mu.Lock()
	defer mu.Unlock()
	entered[callee.Function] = self
	for more {
		var frame runtime.Frame
		frame, more = frames.Next()
		if skipFrame(frame) {
			continue
		}
		if s, ok := entered[frame.Function]; ok {
			caller = s
		}
		break
	}

	record := fmt.Sprintf("MethodEntry: %s, %d, %s Caller: %s, %d, %s\\n",
		self.file, self.line, self.name, caller.file, caller.line, caller.name)
	if seen[record] {
		return
	}
	seen[record] = true
	if !write(record) {
		delete(seen, record)
	}
}

func write(record string) bool {
	if broken {
		return false
	}
	if logFile == nil {
		f, err := os.OpenFile(logPath(), os.O_CREATE|os.O_WRONLY|os.O_APPEND, 0o644)
		if err != nil {
			broken = true
			return false
		}
		logFile = f
	}
	if _, err := logFile.WriteString(record); err != nil {
		logFile.WriteString("__ERROR_SENTINEL__\\n")
		return false
	}
	logFile.Sync()
	return true
}
"""


def recorder_source(log_path: str, module: str) -> str:
    """Recorder package source with the default log path baked in."""
    return (_RECORDER_SOURCE
            .replace("__LOG_PATH__", json.dumps(log_path))
            .replace("__SELF_PREFIX__", json.dumps(f"{module}/{RECORDER_PACKAGE}."))
            .replace("__LOG_ENV__", LOG_ENV_VAR)
            .replace("__ERROR_SENTINEL__", ERROR_SENTINEL))

"""
Subprocess helpers for driving the subject toolchain.
"""

import logging
import queue
import subprocess
import threading
import time
from typing import IO, Dict, List, Optional, Protocol

import psutil
from pydantic import BaseModel

logger = logging.getLogger(__name__)

POLL_INTERVAL = 0.2


class ProcessResult(BaseModel):
    returncode: int
    output: str
    timed_out: bool = False


class LineWatchdog(Protocol):
    """Sees every output line as it arrives and may ask for the process to be killed."""

    def feed(self, line: str) -> None: ...

    def expired(self) -> bool: ...


def kill_process_tree(pid: int) -> None:
    """Kill a process and every descendant (test binaries outlive 'go test' otherwise)."""
    try:
        parent = psutil.Process(pid)
    except psutil.NoSuchProcess:
        return
    procs = parent.children(recursive=True) + [parent]
    for proc in procs:
        try:
            proc.kill()
        except psutil.NoSuchProcess:
            pass
    psutil.wait_procs(procs, timeout=5)


def _pump(stream: IO[bytes], lines: "queue.Queue[Optional[bytes]]") -> None:
    for raw in iter(stream.readline, b""):
        lines.put(raw)
    lines.put(None)


def run_command(
    args: List[str],
    cwd: str,
    timeout: Optional[float] = None,
    env: Optional[Dict[str, str]] = None,
    watchdog: Optional[LineWatchdog] = None,
) -> ProcessResult:
    """
    Run a command with stdout and stderr merged.

    On timeout, or when the watchdog expires, the whole process tree is
    killed and whatever output was produced so far is returned with
    timed_out set.

    Raises:
        FileNotFoundError: the executable does not exist.
    """
    logger.debug(f"[PROC] {' '.join(args)} (cwd={cwd}, timeout={timeout})")
    proc = subprocess.Popen(
        args,
        cwd=cwd,
        env=env,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        stdin=subprocess.DEVNULL,
    )
    if watchdog is None:
        try:
            out, _ = proc.communicate(timeout=timeout)
            return ProcessResult(returncode=proc.returncode, output=out.decode("utf-8", errors="replace"))
        except subprocess.TimeoutExpired:
            logger.warning(f"[PROC] timed out after {timeout}s: {args[0]}; killing process tree")
            kill_process_tree(proc.pid)
            out, _ = proc.communicate()
            return ProcessResult(returncode=-1, output=(out or b"").decode("utf-8", errors="replace"), timed_out=True)
    return _run_watched(proc, args, timeout, watchdog)


def _run_watched(proc: subprocess.Popen, args: List[str], timeout: Optional[float], watchdog: LineWatchdog) -> ProcessResult:
    lines: "queue.Queue[Optional[bytes]]" = queue.Queue()
    reader = threading.Thread(target=_pump, args=(proc.stdout, lines), daemon=True)
    reader.start()
    started = time.monotonic()
    chunks: List[str] = []
    timed_out = False
    while True:
        try:
            raw = lines.get(timeout=POLL_INTERVAL)
        except queue.Empty:
            raw = b""
        if raw is None:
            break
        if raw:
            line = raw.decode("utf-8", errors="replace")
            chunks.append(line)
            watchdog.feed(line)
        if watchdog.expired():
            logger.warning(f"[PROC] watchdog expired: {args[0]}; killing process tree")
            timed_out = True
        elif timeout is not None and time.monotonic() - started > timeout:
            logger.warning(f"[PROC] timed out after {timeout}s: {args[0]}; killing process tree")
            timed_out = True
        if timed_out:
            kill_process_tree(proc.pid)
            break
    reader.join(timeout=5)
    proc.stdout.close()
    while True:
        try:
            raw = lines.get_nowait()
        except queue.Empty:
            break
        if raw:
            chunks.append(raw.decode("utf-8", errors="replace"))
    returncode = proc.wait()
    return ProcessResult(returncode=-1 if timed_out else returncode, output="".join(chunks), timed_out=timed_out)

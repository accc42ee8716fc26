"""
Reference adapter for Go subjects.

Parsing goes through tree-sitter; compiling and running tests shell out to
the `go` tool. Test targets map to package directories.
"""

import logging
import os
import re
import shlex
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from app.adapters.interface import SubjectAdapter
from app.config import RunnerConfig
from app.errors import SelectorNotFound, ToolchainCrashed, ToolchainMissing
from app.models import (
    AsyncLaunchSite,
    CompileDiagnostic,
    DiagnosticKind,
    RunOutcome,
    Scope,
    SubjectFunction,
    TestId,
    Verdict,
)
from app.utils import go_ast
from app.utils.go_test_json import ObservedRun, RunWatchdog, collect_runs
from app.utils.process_utils import run_command

logger = logging.getLogger(__name__)

DIAGNOSTIC_RE = re.compile(r"^(?P<file>[^\s:][^:]*\.go):(?P<line>\d+)(?::(?P<col>\d+))?: (?P<msg>.+)$")
UNUSED_RE = re.compile(r"declared and not used|declared but not used|imported and not used")
SKIPPED_DIRS = {"vendor", "testdata", ".git"}
# Go regexp metacharacters; everything else matches itself.
_RE2_SPECIAL = set("\\.+*?()|[]{}^$")


def re2_escape(text: str) -> str:
    return "".join("\\" + ch if ch in _RE2_SPECIAL else ch for ch in text)


def module_path(workspace: str) -> str:
    go_mod = Path(workspace) / "go.mod"
    try:
        for line in go_mod.read_text(encoding="utf-8").splitlines():
            parts = line.split()
            if len(parts) >= 2 and parts[0] == "module":
                return parts[1].strip('"')
    except FileNotFoundError:
        pass
    return ""


class GoAdapter(SubjectAdapter):
    def __init__(self, runner: Optional[RunnerConfig] = None):
        self.runner = runner or RunnerConfig()

    # Parsing

    def parse_functions(self, file_text: str, path: str) -> List[SubjectFunction]:
        return go_ast.parse_functions(file_text, path)

    def find_async_launches(self, file_text: str, fn: SubjectFunction) -> List[AsyncLaunchSite]:
        return go_ast.find_async_launches(file_text, fn)

    def is_test_file(self, path: str) -> bool:
        return path.endswith("_test.go")

    # Layout

    def package_dir(self, target: str) -> str:
        """'//pkg/payments:unit' and 'pkg/payments' both map to 'pkg/payments'."""
        label = target[2:] if target.startswith("//") else target
        label = label.split(":", 1)[0]
        label = label.strip("/")
        if label.startswith("./"):
            label = label[2:]
        return label or "."

    def source_files(self, workspace: str, packages: Optional[Iterable[str]] = None) -> List[str]:
        """Workspace-relative .go files, optionally restricted to package directories."""
        root = Path(workspace)
        wanted = None if packages is None else {os.path.normpath(p) for p in packages}
        files = []
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames[:] = sorted(d for d in dirnames if d not in SKIPPED_DIRS and not d.startswith("."))
            rel_dir = os.path.normpath(os.path.relpath(dirpath, root))
            if wanted is not None and rel_dir not in wanted:
                continue
            for name in sorted(filenames):
                if name.endswith(".go"):
                    files.append(Path(rel_dir, name).as_posix() if rel_dir != "." else name)
        return files

    def locate_test_function(self, workspace: str, test: TestId) -> Tuple[str, SubjectFunction]:
        """
        Find the test function named by the ticket in the target's *_test.go files.

        Raises:
            SelectorNotFound: no such test function in the package.
        """
        package = self.package_dir(test.target)
        for path in self.source_files(workspace, [package]):
            if not self.is_test_file(path):
                continue
            text = (Path(workspace) / path).read_text(encoding="utf-8")
            if f"func {test.func}(" not in text:
                continue
            for fn in self.parse_functions(text, path):
                if fn.name == test.func:
                    return path, fn
        raise SelectorNotFound(f"test function {test.func} not found in {package}")

    # Toolchain

    def _go_env(self, env: Optional[Dict[str, str]] = None) -> Dict[str, str]:
        merged = dict(os.environ)
        merged.update(env or {})
        return merged

    def compile(self, workspace: str) -> List[CompileDiagnostic]:
        """
        Build every package including test files without running tests.

        Raises:
            ToolchainMissing: the go binary is not installed.
            ToolchainCrashed: the build failed without reporting any diagnostic.
        """
        args = [tok.format(go=self.runner.go_binary) for tok in shlex.split(self.runner.compile_command)]
        try:
            result = run_command(args, cwd=workspace, timeout=self.runner.compile_timeout, env=self._go_env())
        except FileNotFoundError:
            raise ToolchainMissing(f"'{self.runner.go_binary}' not found on PATH")
        if result.timed_out:
            raise ToolchainCrashed("compile timed out", result.output)
        if result.returncode == 0:
            return []
        diagnostics = self.parse_diagnostics(result.output, workspace)
        if not diagnostics:
            raise ToolchainCrashed(f"build failed without diagnostics (exit {result.returncode})", result.output)
        logger.info(f"[BUILD] {len(diagnostics)} diagnostic(s) in {workspace}")
        return diagnostics

    def parse_diagnostics(self, output: str, workspace: str) -> List[CompileDiagnostic]:
        diagnostics = []
        seen = set()
        root = os.path.realpath(workspace)
        for raw in output.splitlines():
            match = DIAGNOSTIC_RE.match(raw.strip())
            if not match:
                continue
            path = match.group("file")
            if path.startswith("./"):
                path = path[2:]
            if os.path.isabs(path):
                real = os.path.realpath(path)
                if real.startswith(root + os.sep):
                    path = Path(os.path.relpath(real, root)).as_posix()
            message = match.group("msg").strip()
            diagnostic = CompileDiagnostic(
                file=path,
                line=int(match.group("line")),
                column=int(match.group("col") or 0),
                message=message,
                kind=DiagnosticKind.UNUSED_VARIABLE if UNUSED_RE.search(message) else DiagnosticKind.OTHER,
            )
            key = diagnostic.render()
            if key not in seen:
                seen.add(key)
                diagnostics.append(diagnostic)
        return diagnostics

    def _test_args(self, selector: TestId, scope: Scope, count: int, race: bool, timeout: float) -> List[str]:
        if scope == Scope.CASE:
            run = f"^{re2_escape(selector.func)}$"
            if selector.case:
                run += f"/^{re2_escape(selector.go_case)}$"
        else:
            run = "."
        package = self.package_dir(selector.target)
        values = {
            "go": self.runner.go_binary,
            "raceflag": "-race" if race else "",
            "runcount": str(count),
            "timeout": str(int(max(1, round(timeout)))),
            "run": run,
            "target": "." if package == "." else "./" + package,
        }
        args = [tok.format(**values) for tok in shlex.split(self.runner.test_command)]
        return [a for a in args if a]

    def run_test(
        self,
        workspace: str,
        selector: TestId,
        scope: Scope,
        runs: int,
        race: bool,
        timeout: float,
        env: Optional[Dict[str, str]] = None,
    ) -> List[RunOutcome]:
        """
        Run one test `runs` times, in batches of the configured size.

        scope=target runs every test of the package and keeps only the
        selected test's runs. A binary that dies mid-batch closes the open run
        as fail (or timeout) and the remaining runs start a new batch; a run
        open longer than `timeout` gets its binary killed the same way. Skipped
        runs yield no outcome.

        Raises:
            ToolchainMissing: the go binary is not installed.
            SelectorNotFound: the runner never started the selected test.
        """
        outcomes: List[RunOutcome] = []
        while len(outcomes) < runs:
            count = min(self.runner.batch_size, runs - len(outcomes))
            # The watchdog bounds each run; go's -timeout only bounds the whole binary and stays as a backstop.
            args = self._test_args(selector, scope, count, race, timeout * count)
            watchdog = RunWatchdog(selector.run_name, timeout)
            started = time.monotonic()
            try:
                result = run_command(
                    args, cwd=workspace, timeout=timeout * count + 60, env=self._go_env(env), watchdog=watchdog,
                )
            except FileNotFoundError:
                raise ToolchainMissing(f"'{self.runner.go_binary}' not found on PATH")
            elapsed = time.monotonic() - started

            parsed = collect_runs(result.output, selector.run_name)
            if parsed.build_failed:
                logger.info(f"[RUN] build failed for {selector.render()}")
                return [RunOutcome(
                    test=selector,
                    run_index=0,
                    verdict=Verdict.BUILD_ERROR,
                    raw_output=parsed.build_output or result.output,
                    duration=elapsed,
                )]
            observed = parsed.runs[:count]
            if result.timed_out:
                if observed and observed[-1].verdict != Verdict.PASS:
                    observed[-1] = ObservedRun(verdict=Verdict.TIMEOUT, output=observed[-1].output)
                elif not observed:
                    observed.append(ObservedRun(verdict=Verdict.TIMEOUT, output=result.output[-4000:] or "killed after exceeding the run timeout"))
            if not observed:
                if parsed.skipped:
                    logger.warning(f"[RUN] {selector.run_name} skipped itself {parsed.skipped} time(s); no verdict recorded")
                    break
                if not outcomes:
                    raise SelectorNotFound(f"{selector.run_name} did not run in {selector.target}")
                logger.warning(f"[RUN] batch produced no runs of {selector.run_name}; stopping early")
                break
            per_run = elapsed / len(observed)
            for run in observed:
                verdict = run.verdict
                output = run.output if (run.output or verdict == Verdict.PASS) else "test failed without output"
                outcomes.append(RunOutcome(
                    test=selector,
                    run_index=len(outcomes),
                    verdict=verdict,
                    raw_output=output,
                    duration=per_run,
                ))
        fails = sum(1 for o in outcomes if o.verdict != Verdict.PASS)
        logger.info(f"[RUN] {selector.render()} scope={scope.value}: {fails}/{len(outcomes)} non-passing")
        return outcomes


"""
Turns the `go test -json` event stream into per-run verdicts for one test.
"""

import json
import logging
import time
from typing import Callable, List, Optional, Tuple

from pydantic import BaseModel

from app.models import Verdict

logger = logging.getLogger(__name__)

BUILD_FAILURE_MARKERS = ("[build failed]", "[setup failed]")
TIMEOUT_MARKER = "test timed out"

_END_ACTIONS = {"pass": Verdict.PASS, "fail": Verdict.FAIL}
SKIP_ACTION = "skip"


class TestEvent(BaseModel):
    __test__ = False

    action: str
    package: str = ""
    test: str = ""
    output: str = ""


class ObservedRun(BaseModel):
    verdict: Verdict
    output: str


class ParsedStream(BaseModel):
    runs: List[ObservedRun] = []
    skipped: int = 0
    build_failed: bool = False
    build_output: str = ""


def parse_events(text: str) -> Tuple[List[TestEvent], List[str]]:
    """Split raw runner output into JSON events and the non-JSON lines around them."""
    events, stray = [], []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped.startswith("{"):
            if stripped:
                stray.append(line)
            continue
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError:
            stray.append(line)
            continue
        events.append(TestEvent(
            action=raw.get("Action", ""),
            package=raw.get("Package", ""),
            test=raw.get("Test", "") or "",
            output=raw.get("Output", "") or "",
        ))
    return events, stray


def _belongs(test_name: str, selected: str) -> bool:
    return test_name == selected or test_name.startswith(selected + "/")


def collect_runs(text: str, selected: str) -> ParsedStream:
    """
    Group the event stream into runs of the selected test.

    A run starts at a 'run' event for the selected name and ends at its
    pass or fail event; a skipped run yields no verdict and only counts in
    `skipped`. Output of nested subtests and package-level output emitted
    while a run is open are attributed to it. A run left open when
    the stream ends (crash, panic, killed binary) is closed as a failure, or
    as a timeout when the output shows the runner's timeout panic.
    """
    events, stray = parse_events(text)
    parsed = ParsedStream()

    build_lines = list(stray)
    for event in events:
        if event.action == "build-fail":
            parsed.build_failed = True
        if event.action == "build-output":
            build_lines.append(event.output.rstrip("\n"))
        if event.action == "output" and not event.test and any(m in event.output for m in BUILD_FAILURE_MARKERS):
            parsed.build_failed = True
            build_lines.append(event.output.rstrip("\n"))
    if any(m in line for line in stray for m in BUILD_FAILURE_MARKERS):
        parsed.build_failed = True
    if parsed.build_failed:
        parsed.build_output = "\n".join(build_lines)
        return parsed

    current: Optional[List[str]] = None
    for event in events:
        if event.action == "run" and event.test == selected:
            if current is not None:
                parsed.runs.append(_close_open_run(current))
            current = []
            continue
        if current is None:
            continue
        if event.action == "output" and (not event.test or _belongs(event.test, selected)):
            current.append(event.output)
        elif event.action == SKIP_ACTION and event.test == selected:
            parsed.skipped += 1
            current = None
        elif event.action in _END_ACTIONS and event.test == selected:
            output = "".join(current)
            verdict = _END_ACTIONS[event.action]
            parsed.runs.append(ObservedRun(verdict=verdict, output=output))
            current = None
    if current is not None:
        # Stray lines may carry the crash output when stderr was not captured as JSON.
        current.extend(line + "\n" for line in stray)
        parsed.runs.append(_close_open_run(current))
    return parsed


def _close_open_run(lines: List[str]) -> ObservedRun:
    output = "".join(lines)
    verdict = Verdict.TIMEOUT if TIMEOUT_MARKER in output else Verdict.FAIL
    if not output:
        output = "test run ended without a result event"
    return ObservedRun(verdict=verdict, output=output)


class RunWatchdog:
    """
    Watches a live event stream and expires when one run of the selected
    test has been open longer than the per-run timeout.

    Time spent building the binary or in other tests is not counted.
    """

    def __init__(self, selected: str, per_run_timeout: float, clock: Callable[[], float] = time.monotonic):
        self.selected = selected
        self.per_run_timeout = per_run_timeout
        self.clock = clock
        self.run_started: Optional[float] = None
        self.fired = False

    def feed(self, line: str) -> None:
        stripped = line.strip()
        if not stripped.startswith("{"):
            return
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError:
            return
        if (raw.get("Test") or "") != self.selected:
            return
        action = raw.get("Action", "")
        if action == "run":
            self.run_started = self.clock()
        elif action in _END_ACTIONS or action == SKIP_ACTION:
            self.run_started = None

    def expired(self) -> bool:
        if self.run_started is None:
            return False
        if self.clock() - self.run_started > self.per_run_timeout:
            if not self.fired:
                logger.warning(f"[RUN] {self.selected} exceeded {self.per_run_timeout}s in a single run")
            self.fired = True
        return self.fired

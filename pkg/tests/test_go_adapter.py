import time

import pytest

import app.adapters.go_adapter as go_adapter
from app.adapters.go_adapter import GoAdapter
from app.config import RunnerConfig
from app.errors import SelectorNotFound
from app.models import Scope, Verdict
from app.utils.process_utils import ProcessResult, run_command
from tests.test_fixing_loop import KEYS
from tests.test_go_test_json import event, stream

CASE = "TestKeys/two_items"


class ScriptedRunner:
    """Stands in for run_command: hands out one canned result per invocation."""

    def __init__(self, *results):
        self.results = list(results)
        self.calls = []

    def __call__(self, args, cwd, timeout=None, env=None, watchdog=None):
        self.calls.append({"args": args, "timeout": timeout, "watchdog": watchdog})
        return self.results.pop(0)


def passing(n):
    lines = []
    for _ in range(n):
        lines += [event("run", CASE), event("pass", CASE)]
    return ProcessResult(returncode=0, output=stream(*lines))


@pytest.fixture
def runner(monkeypatch):
    def install(*results):
        scripted = ScriptedRunner(*results)
        monkeypatch.setattr(go_adapter, "run_command", scripted)
        return scripted
    return install


def test_hung_run_is_a_timeout_and_the_rest_continue(runner, goshop):
    hung = ProcessResult(
        returncode=-1,
        output=stream(event("run", CASE), event("pass", CASE), event("run", CASE)),
        timed_out=True,
    )
    scripted = runner(hung, passing(2))
    outcomes = GoAdapter(RunnerConfig(batch_size=4)).run_test(goshop, KEYS, Scope.CASE, 4, race=False, timeout=10)

    assert [o.verdict for o in outcomes] == [Verdict.PASS, Verdict.TIMEOUT, Verdict.PASS, Verdict.PASS]
    first = scripted.calls[0]
    assert first["watchdog"].per_run_timeout == 10
    assert first["watchdog"].selected == CASE
    assert "-count=4" in first["args"]
    assert "-timeout=40s" in first["args"]
    assert "-count=2" in scripted.calls[1]["args"]


def test_skipped_test_is_not_a_missing_selector(runner, goshop):
    runner(ProcessResult(returncode=0, output=stream(event("run", CASE), event("skip", CASE))))
    outcomes = GoAdapter().run_test(goshop, KEYS, Scope.CASE, 3, race=False, timeout=10)
    assert outcomes == []


def test_missing_selector_still_raises(runner, goshop):
    runner(ProcessResult(returncode=0, output=stream(event("output", output="testing: warning: no tests to run\n"))))
    with pytest.raises(SelectorNotFound):
        GoAdapter().run_test(goshop, KEYS, Scope.CASE, 3, race=False, timeout=10)


class ExpireAfter:
    def __init__(self, marker):
        self.marker = marker
        self.seen = False

    def feed(self, line):
        self.seen = self.seen or self.marker in line

    def expired(self):
        return self.seen


def test_watchdog_kills_the_process_tree(tmp_path):
    started = time.monotonic()
    result = run_command(["sh", "-c", "echo ready; echo hang; sleep 30"], cwd=str(tmp_path), timeout=60,
                         watchdog=ExpireAfter("hang"))
    assert result.timed_out
    assert result.output.startswith("ready\n")
    assert time.monotonic() - started < 20


def test_watched_run_returns_all_output(tmp_path):
    result = run_command(["sh", "-c", "echo one; echo two"], cwd=str(tmp_path), timeout=60, watchdog=ExpireAfter("never"))
    assert not result.timed_out
    assert result.returncode == 0
    assert result.output == "one\ntwo\n"

import json

from app.models import Verdict
from app.utils.go_test_json import RunWatchdog, collect_runs, parse_events
from tests.support import FakeClock


def event(action, test="", output=None, package="example.com/goshop/flaky"):
    raw = {"Action": action, "Package": package}
    if test:
        raw["Test"] = test
    if output is not None:
        raw["Output"] = output
    return json.dumps(raw)


def stream(*lines):
    return "\n".join(lines) + "\n"


def test_runs_are_grouped_per_selected_test():
    text = stream(
        event("run", "TestKeys"),
        event("run", "TestKeys/two_items"),
        event("output", "TestKeys/two_items", "    maporder_test.go:21: Keys() = [pear apple]\n"),
        event("fail", "TestKeys/two_items"),
        event("fail", "TestKeys"),
        event("run", "TestKeys"),
        event("run", "TestKeys/two_items"),
        event("pass", "TestKeys/two_items"),
        event("pass", "TestKeys"),
    )
    parsed = collect_runs(text, "TestKeys/two_items")
    assert [r.verdict for r in parsed.runs] == [Verdict.FAIL, Verdict.PASS]
    assert "maporder_test.go:21" in parsed.runs[0].output
    assert not parsed.build_failed


def test_other_tests_are_ignored():
    text = stream(
        event("run", "TestRegion/explicit_region"),
        event("output", "TestRegion/explicit_region", "noise\n"),
        event("pass", "TestRegion/explicit_region"),
        event("run", "TestRegion/default_region"),
        event("output", "TestRegion/default_region", "    region_test.go:30: Region() = \"eu-west\"\n"),
        event("fail", "TestRegion/default_region"),
    )
    parsed = collect_runs(text, "TestRegion/default_region")
    assert len(parsed.runs) == 1
    assert "noise" not in parsed.runs[0].output


def test_open_run_is_closed_as_timeout_or_fail():
    timed_out = stream(
        event("run", "TestSlow"),
        event("output", "", "panic: test timed out after 5s\n"),
    )
    parsed = collect_runs(timed_out, "TestSlow")
    assert [r.verdict for r in parsed.runs] == [Verdict.TIMEOUT]

    crashed = stream(event("run", "TestCrash"), "fatal error: concurrent map writes")
    parsed = collect_runs(crashed, "TestCrash")
    assert [r.verdict for r in parsed.runs] == [Verdict.FAIL]
    assert "concurrent map writes" in parsed.runs[0].output


def test_build_failure_is_detected():
    text = stream(
        event("build-output", output="flaky/maporder_test.go:9:2: declared and not used: x\n", package=""),
        event("build-fail", package=""),
        event("output", output="FAIL\texample.com/goshop/flaky [build failed]\n"),
    )
    parsed = collect_runs(text, "TestKeys")
    assert parsed.build_failed
    assert "declared and not used" in parsed.build_output
    assert parsed.runs == []


def test_parse_events_keeps_stray_lines():
    events, stray = parse_events('{"Action":"run","Test":"TestA"}\nnot json\n{broken\n')
    assert [e.action for e in events] == ["run"]
    assert stray == ["not json", "{broken"]


def test_skipped_runs_have_no_verdict():
    text = stream(
        event("run", "TestKeys/two_items"),
        event("output", "TestKeys/two_items", "    maporder_test.go:12: skipping in short mode\n"),
        event("skip", "TestKeys/two_items"),
        event("run", "TestKeys/two_items"),
        event("pass", "TestKeys/two_items"),
    )
    parsed = collect_runs(text, "TestKeys/two_items")
    assert [r.verdict for r in parsed.runs] == [Verdict.PASS]
    assert parsed.skipped == 1


def test_watchdog_times_single_runs_only():
    clock = FakeClock()
    watchdog = RunWatchdog("TestSlow/case", per_run_timeout=10, clock=clock)

    clock.advance(60)  # building the binary
    assert not watchdog.expired()
    watchdog.feed(event("run", "TestSlow") + "\n")
    watchdog.feed(event("run", "TestSlow/case") + "\n")
    clock.advance(8)
    assert not watchdog.expired()
    watchdog.feed(event("pass", "TestSlow/case") + "\n")
    clock.advance(30)
    assert not watchdog.expired()

    watchdog.feed(event("run", "TestSlow/case") + "\n")
    watchdog.feed("not json\n")
    clock.advance(11)
    assert watchdog.expired()
    assert watchdog.fired

import json

from app.logic.report import render_attempts, render_report
from app.models import (
    AttemptRecord,
    FailureRecord,
    FixOutcome,
    FixStatus,
    ReproductionReport,
    RootCause,
    RootCauseCategory,
    Scope,
    TestId,
    Thought,
)

TEST = TestId(target="flaky", func="TestKeys", case="two items")
FAILURE = FailureRecord(
    message="Keys() = [pear apple], want [apple pear]",
    assertion_file="flaky/maporder_test.go",
    assertion_line=21,
    assertion_stmt='t.Errorf("Keys() = %v, want %v", got, tc.want)',
)


def outcome(status, **fields):
    report = ReproductionReport(
        test=TEST, attempted_runs=100, failures=[FAILURE] * 3, scope_used=Scope.CASE,
        reproduced=status != FixStatus.NOT_REPRODUCED, observed_failures=3,
    )
    return FixOutcome(status=status, test=TEST, reproduction=report, primary_failure=FAILURE, **fields)


def test_fixed_report():
    fixed = outcome(
        FixStatus.FIXED,
        diff="--- a/flaky/maporder_test.go\n+++ b/flaky/maporder_test.go\n@@ -19 +19,2 @@\n+\t\t\tsort.Strings(got)\n",
        thought=Thought(
            category=RootCauseCategory(kind=RootCause.UNORDERED_COLLECTION_ITERATION),
            explanation="Keys ranges over a map.",
            plan="Sort before comparing.",
        ),
        attempts_log=[
            AttemptRecord(m=1, p=1, n=1, category="unordered-collection-iteration", outcome="test-failed",
                          summary="test-failed (0/100 reruns passed) | flaky"),
            AttemptRecord(m=1, p=1, n=2, category="unordered-collection-iteration", outcome="accepted",
                          summary="accepted (100/100 reruns passed)", revert_hash="abc"),
        ],
        context_nodes=["Keys@flaky/maporder.go:4"],
        llm_calls=4,
    )
    text = render_report(fixed)
    assert text.startswith("# Flaky test report: flaky/TestKeys/two items\n\nStatus: **fixed**\n")
    assert "- Failing runs observed: 3" in text
    assert "Primary failure at `flaky/maporder_test.go:21`:" in text
    assert "```diff\n--- a/flaky/maporder_test.go" in text
    assert "- Category: unordered-collection-iteration" in text
    assert "- `Keys@flaky/maporder.go:4`" in text
    assert "| 1 | 1 | 1 | unordered-collection-iteration | test-failed | test-failed (0/100 reruns passed) \\| flaky |" in text
    assert text.endswith("LLM calls: 4\n")


def test_not_reproduced_report_is_short():
    text = render_report(outcome(FixStatus.NOT_REPRODUCED, notes=["ran both scopes"]))
    assert "Status: **not-reproduced**" in text
    assert "## Fix" not in text
    assert "- ran both scopes" in text


def test_exhausted_report_without_context():
    text = render_report(outcome(FixStatus.EXHAUSTED))
    assert "No fix was accepted." in text
    assert "No accepted analysis." in text
    assert "- (none)" in text


def test_attempts_ledger_is_sorted_json_lines():
    records = [AttemptRecord(m=1, p=2, n=0, outcome="thought-parse-failure", summary="no PLAN")]
    ledger = render_attempts(outcome(FixStatus.EXHAUSTED, attempts_log=records))
    line = ledger.splitlines()[0]
    assert json.loads(line)["outcome"] == "thought-parse-failure"
    assert list(json.loads(line)) == sorted(json.loads(line))
    assert render_attempts(outcome(FixStatus.EXHAUSTED)) == ""

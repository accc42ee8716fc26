"""
Markdown report and attempts ledger for one processed test.

Both are pure functions of the outcome so replayed runs produce identical
artifacts.
"""

import json
from typing import List

from app.models import FixOutcome, FixStatus, ReproductionReport


def _reproduction_section(report: ReproductionReport, outcome: FixOutcome) -> List[str]:
    lines = [
        "## Reproduction",
        "",
        f"- Runs per scope: {report.attempted_runs}",
        f"- Scope used: {report.scope_used.value}",
        f"- Failing runs observed: {report.observed_failures}",
        f"- Failures extracted: {len(report.failures)}",
        f"- Failing runs without a usable message: {report.unextracted_failures}",
    ]
    primary = outcome.primary_failure
    if primary is not None:
        lines += [
            "",
            f"Primary failure at `{primary.assertion_file}:{primary.assertion_line}`:",
            "",
            "```",
            primary.message,
            "```",
        ]
        if primary.assertion_stmt:
            lines += ["", "```go", primary.assertion_stmt, "```"]
    return lines


def render_report(outcome: FixOutcome) -> str:
    lines = [f"# Flaky test report: {outcome.test.render()}", "", f"Status: **{outcome.status.value}**", ""]

    if outcome.reproduction is not None:
        lines += _reproduction_section(outcome.reproduction, outcome) + [""]
    if outcome.status == FixStatus.NOT_REPRODUCED:
        lines += _notes(outcome)
        return "\n".join(lines).rstrip("\n") + "\n"

    lines += ["## Fix", ""]
    if outcome.diff:
        lines += ["```diff", outcome.diff.rstrip("\n"), "```", ""]
    else:
        lines += ["No fix was accepted.", ""]

    lines += ["## Root cause", ""]
    if outcome.thought is not None:
        lines += [
            f"- Category: {outcome.thought.category.render()}",
            f"- Explanation: {outcome.thought.explanation}",
            f"- Plan: {outcome.thought.plan}",
            "",
        ]
    else:
        lines += ["No accepted analysis.", ""]

    lines += ["## Context", ""]
    lines += [f"- `{label}`" for label in outcome.context_nodes] or ["- (none)"]
    lines.append("")

    lines += ["## Attempts", "", "| m | p | n | category | outcome | summary |", "|---|---|---|---|---|---|"]
    for record in outcome.attempts_log:
        summary = record.summary.replace("|", "\\|").replace("\n", " ")
        lines.append(f"| {record.m} | {record.p} | {record.n} | {record.category} | {record.outcome} | {summary} |")
    lines.append("")
    lines += _notes(outcome)
    lines.append(f"LLM calls: {outcome.llm_calls}")
    return "\n".join(lines).rstrip("\n") + "\n"


def _notes(outcome: FixOutcome) -> List[str]:
    if not outcome.notes:
        return []
    return ["## Notes", ""] + [f"- {note}" for note in outcome.notes] + [""]


def render_attempts(outcome: FixOutcome) -> str:
    """One JSON object per attempt, keys sorted."""
    return "".join(json.dumps(r.model_dump(mode="json"), sort_keys=True) + "\n" for r in outcome.attempts_log)

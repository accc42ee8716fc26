"""
Root-cause categories for flaky tests, with one-line descriptions and the
aliases used to normalise free-text categories from model responses.
"""

import re

from app.models import RootCause, RootCauseCategory

CATEGORY_DESCRIPTIONS = {
    RootCause.SCHEDULE_RANDOMNESS: "Goroutine scheduling decides the outcome: select over several ready channels, asynchronous waits, or interleavings that violate atomicity.",
    RootCause.UNORDERED_COLLECTION_ITERATION: "The test assumes a fixed order while iterating an unordered collection such as a Go map.",
    RootCause.TIMESTAMP_DISCREPANCY: "Expected and actual values capture time.Now() at different sites, so timestamp fields differ.",
    RootCause.STATE_POLLUTION: "Shared state (globals, environment, files, databases) is modified by another test running before or alongside this one.",
    RootCause.TIME_DEPENDENT: "The outcome depends on the wall clock, e.g. a cutoff computed from time.Now() in both test and production code.",
}

# Category names as they appear in reports and responses, lower-cased.
ALIASES = {
    "schedule randomness": RootCause.SCHEDULE_RANDOMNESS,
    "scheduling randomness": RootCause.SCHEDULE_RANDOMNESS,
    "concurrency": RootCause.SCHEDULE_RANDOMNESS,
    "async wait": RootCause.SCHEDULE_RANDOMNESS,
    "asynchronous wait": RootCause.SCHEDULE_RANDOMNESS,
    "race condition": RootCause.SCHEDULE_RANDOMNESS,
    "random iteration of unordered collections": RootCause.UNORDERED_COLLECTION_ITERATION,
    "unordered collection iteration": RootCause.UNORDERED_COLLECTION_ITERATION,
    "unordered collections": RootCause.UNORDERED_COLLECTION_ITERATION,
    "map iteration order": RootCause.UNORDERED_COLLECTION_ITERATION,
    "map order": RootCause.UNORDERED_COLLECTION_ITERATION,
    "timestamp discrepancy": RootCause.TIMESTAMP_DISCREPANCY,
    "timestamp mismatch": RootCause.TIMESTAMP_DISCREPANCY,
    "state pollution": RootCause.STATE_POLLUTION,
    "test pollution": RootCause.STATE_POLLUTION,
    "shared state": RootCause.STATE_POLLUTION,
    "test order dependency": RootCause.STATE_POLLUTION,
    "time-dependent flakiness": RootCause.TIME_DEPENDENT,
    "time dependent": RootCause.TIME_DEPENDENT,
    "time-dependent": RootCause.TIME_DEPENDENT,
    "wall clock": RootCause.TIME_DEPENDENT,
}

# Checked in order when no alias matches exactly.
KEYWORDS = (
    ("timestamp", RootCause.TIMESTAMP_DISCREPANCY),
    ("unordered", RootCause.UNORDERED_COLLECTION_ITERATION),
    ("iteration", RootCause.UNORDERED_COLLECTION_ITERATION),
    ("map", RootCause.UNORDERED_COLLECTION_ITERATION),
    ("pollution", RootCause.STATE_POLLUTION),
    ("global state", RootCause.STATE_POLLUTION),
    ("schedul", RootCause.SCHEDULE_RANDOMNESS),
    ("goroutine", RootCause.SCHEDULE_RANDOMNESS),
    ("select", RootCause.SCHEDULE_RANDOMNESS),
    ("clock", RootCause.TIME_DEPENDENT),
    ("time", RootCause.TIME_DEPENDENT),
)


def normalize_category(text: str) -> RootCauseCategory:
    """Map a free-text category onto the taxonomy, or other(<label>)."""
    label = text.strip().strip("*`\"' .")
    key = re.sub(r"\s+", " ", label.lower())
    for cause in RootCause:
        if key == cause.value:
            return RootCauseCategory(kind=cause)
    match = re.fullmatch(r"other\s*\((.+)\)", key)
    if match:
        return RootCauseCategory(kind=RootCause.OTHER, label=match.group(1).strip())
    if key in ALIASES:
        return RootCauseCategory(kind=ALIASES[key])
    for keyword, cause in KEYWORDS:
        if keyword in key:
            return RootCauseCategory(kind=cause)
    return RootCauseCategory(kind=RootCause.OTHER, label=label or "unspecified")


def render_taxonomy() -> str:
    lines = [f"- {cause.value}: {description}" for cause, description in CATEGORY_DESCRIPTIONS.items()]
    lines.append("- other(<label>): none of the above; name the new category in the parentheses.")
    return "\n".join(lines)

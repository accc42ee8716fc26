import pytest

from app.errors import EmptySelection, NonTestEdit, PatchParseFailure, ThoughtParseFailure
from app.llm.parsers import parse_extraction, parse_patch, parse_selection, parse_thought
from app.models import RootCause
from app.prompts.taxonomy import normalize_category

FIXED_TEST = 'func TestKeys(t *testing.T) {\n\tt.Log("fixed")\n}'


def test_selection_keeps_order_and_cap():
    assert parse_selection("3, 1, 3, 7, 2", n_candidates=5, cap=2) == [3, 1]
    assert parse_selection("Functions 12 and 4 look relevant", n_candidates=5, cap=3) == [4]
    with pytest.raises(EmptySelection):
        parse_selection("none of these", n_candidates=5, cap=3)
    with pytest.raises(EmptySelection):
        parse_selection("0 6 9", n_candidates=5, cap=3)


def test_thought_sections_in_any_order():
    thought = parse_thought(
        "**PLAN:** sort the keys before comparing\n"
        "**CATEGORY:** Random iteration of unordered collections\n"
        "**EXPLANATION:** Keys ranges over a map.\n"
    )
    assert thought.category.kind == RootCause.UNORDERED_COLLECTION_ITERATION
    assert thought.explanation == "Keys ranges over a map."
    assert thought.plan == "sort the keys before comparing"


def test_thought_with_missing_section():
    with pytest.raises(ThoughtParseFailure) as info:
        parse_thought("CATEGORY: state-pollution\nEXPLANATION: the env leaks\n")
    assert "PLAN" in str(info.value)


@pytest.mark.parametrize("text, kind", [
    ("schedule-randomness", RootCause.SCHEDULE_RANDOMNESS),
    ("Concurrency", RootCause.SCHEDULE_RANDOMNESS),
    ("Timestamp mismatch between expected and actual", RootCause.TIMESTAMP_DISCREPANCY),
    ("Test Pollution", RootCause.STATE_POLLUTION),
    ("wall clock", RootCause.TIME_DEPENDENT),
])
def test_normalize_category(text, kind):
    assert normalize_category(text).kind == kind


def test_unknown_categories_become_other():
    assert normalize_category("other(network dependency)").label == "network dependency"
    category = normalize_category("Flaky DNS")
    assert category.kind == RootCause.OTHER
    assert category.label == "Flaky DNS"


def test_patch_is_the_single_fenced_function():
    response = f"Here is the fix:\n```go\n{FIXED_TEST}\n```\nThis sorts nothing."
    assert parse_patch(response, "TestKeys") == FIXED_TEST


def test_patch_for_another_function():
    response = "```go\nfunc TestOther(t *testing.T) {}\n```"
    with pytest.raises(PatchParseFailure):
        parse_patch(response, "TestKeys")


def test_patch_with_several_blocks_or_none():
    with pytest.raises(PatchParseFailure):
        parse_patch(f"```go\n{FIXED_TEST}\n```\n```go\n{FIXED_TEST}\n```", "TestKeys")
    with pytest.raises(PatchParseFailure):
        parse_patch("I would sort the keys.", "TestKeys")
    with pytest.raises(PatchParseFailure):
        parse_patch("```go\nfunc TestKeys(t *testing.T) {\n```", "TestKeys")


def test_patch_touching_production_code():
    diff = "--- a/flaky/maporder.go\n+++ b/flaky/maporder.go\n@@ -1 +1 @@\n-x\n+y\n"
    with pytest.raises(NonTestEdit):
        parse_patch(diff, "TestKeys")
    redefined = f"```go\n{FIXED_TEST}\n```\n```go\nfunc Keys(m map[string]int) []string {{ return nil }}\n```"
    with pytest.raises(NonTestEdit):
        parse_patch(redefined, "TestKeys", production_names=["Keys"])


def test_extraction_inside_a_fence():
    data = parse_extraction('```json\n{"message": " boom ", "file": "a_test.go", "line": "12"}\n```')
    assert data == {"message": "boom", "file": "a_test.go", "line": 12, "stack_trace": ""}
    with pytest.raises(ValueError):
        parse_extraction("no json here")

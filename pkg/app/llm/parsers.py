"""
Strict parsers for model responses: selections, thoughts, patches and
extracted failure fields.
"""

import json
import re
from typing import Iterable, List, Optional

from app.errors import EmptySelection, NonTestEdit, ParseError, PatchParseFailure, ThoughtParseFailure
from app.models import Thought
from app.prompts.taxonomy import normalize_category
from app.utils import go_ast
from app.utils.text_utils import extract_fenced_blocks, strip_code_fence

SECTION_RE = re.compile(
    r"^[ \t>#*_-]*\**(CATEGORY|EXPLANATION|PLAN)\**[ \t]*:\**[ \t]*",
    re.IGNORECASE | re.MULTILINE,
)
DIFF_HEADER_RE = re.compile(r"^(?:diff --git a/(\S+)|\+\+\+ (?:b/)?(\S+)|--- (?:a/)?(\S+))", re.MULTILINE)


def parse_selection(response: str, n_candidates: int, cap: int) -> List[int]:
    """
    Distinct 1-based candidate indices in order of appearance, capped.

    Raises:
        EmptySelection: no integer in range was found.
    """
    picked: List[int] = []
    for token in re.findall(r"\b\d+\b", response):
        value = int(token)
        if 1 <= value <= n_candidates and value not in picked:
            picked.append(value)
            if len(picked) >= cap:
                break
    if not picked:
        raise EmptySelection(f"no candidate index in 1..{n_candidates} in response {response[:80]!r}")
    return picked


def parse_thought(response: str) -> Thought:
    """
    Read the CATEGORY, EXPLANATION and PLAN sections in any order.

    Raises:
        ThoughtParseFailure: a section is missing or empty.
    """
    matches = list(SECTION_RE.finditer(response))
    sections = {}
    for index, match in enumerate(matches):
        end = matches[index + 1].start() if index + 1 < len(matches) else len(response)
        name = match.group(1).upper()
        body = response[match.end():end].strip().strip("*").strip()
        if name not in sections and body:
            sections[name] = body
    missing = [name for name in ("CATEGORY", "EXPLANATION", "PLAN") if name not in sections]
    if missing:
        raise ThoughtParseFailure(f"response lacks section(s): {', '.join(missing)}")
    category_line = sections["CATEGORY"].splitlines()[0]
    return Thought(
        category=normalize_category(category_line),
        explanation=sections["EXPLANATION"],
        plan=sections["PLAN"],
    )


def _declared_names(code: str) -> List[str]:
    try:
        tree, source, _ = go_ast.parse_function_snippet(code)
    except ParseError:
        return []
    names = []
    for node in go_ast.top_level_functions(tree):
        names.append(go_ast.node_text(source, node.child_by_field_name("name")))
    return names


def parse_patch(response: str, target_func: str, production_names: Optional[Iterable[str]] = None) -> str:
    """
    Extract the whole-function replacement for the target test function.

    Raises:
        NonTestEdit: the response edits production code.
        PatchParseFailure: not exactly one fenced block, or the block is not a
            single function declaration named target_func.
    """
    for match in DIFF_HEADER_RE.finditer(response):
        path = next(g for g in match.groups() if g)
        if path != "/dev/null" and path.endswith(".go") and not path.endswith("_test.go"):
            raise NonTestEdit(f"response edits production file {path}")

    blocks = extract_fenced_blocks(response)
    production = set(production_names or ()) - {target_func}
    for _, body in blocks:
        touched = production.intersection(_declared_names(body))
        if touched:
            raise NonTestEdit(f"response redefines production function(s) {', '.join(sorted(touched))}")

    if len(blocks) != 1:
        raise PatchParseFailure(f"expected exactly one fenced code block, found {len(blocks)}")
    code = blocks[0][1].strip("\n")
    try:
        tree, source, _ = go_ast.parse_function_snippet(code)
    except ParseError as e:
        raise PatchParseFailure(f"fenced block does not parse: {e}")
    declarations = [n for n in tree.root_node.named_children if n.type not in ("package_clause", "comment")]
    if len(declarations) != 1 or declarations[0].type != "function_declaration":
        raise PatchParseFailure("fenced block must contain exactly one function declaration")
    name = go_ast.node_text(source, declarations[0].child_by_field_name("name"))
    if name != target_func:
        raise PatchParseFailure(f"fenced block declares {name}, expected {target_func}")
    return code


def parse_extraction(response: str) -> dict:
    """JSON object with message/file/line/stack_trace, tolerant of a surrounding code fence."""
    text = strip_code_fence(response)
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end <= start:
        raise ValueError("no JSON object in extraction response")
    data = json.loads(text[start:end + 1])
    if not isinstance(data, dict):
        raise ValueError("extraction response is not a JSON object")
    return {
        "message": str(data.get("message", "") or "").strip(),
        "file": str(data.get("file", "") or "").strip(),
        "line": int(data.get("line", 0) or 0),
        "stack_trace": str(data.get("stack_trace", "") or ""),
    }

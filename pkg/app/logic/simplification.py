"""
Test simplification: reduce a table-driven test to the targeted case.

Removals are recorded as byte edits against the original function text.
Declarations left unused by the removals are commented out with a
restoration marker until the package compiles again.
"""

import logging
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field

from app.adapters.interface import SubjectAdapter
from app.errors import NeutralizationDiverged, ParseError, SelectorNotFound, TableNotFound
from app.models import DiagnosticKind, FunctionKind, SubjectFunction
from app.utils import go_ast
from app.utils.edit_utils import Edit, EditTag, apply_edits
from app.utils.go_tables import CaseTable, find_table
from app.utils.workspace_utils import read_text, write_text

logger = logging.getLogger(__name__)

RESTORE_MARKER = "// FLAKYGUARD-RESTORE "
MAX_NEUTRALIZE_ITERATIONS = 10


class SimplifiedTest(BaseModel):
    path: str
    func: str
    func_span: Tuple[int, int] = Field(..., description="Byte span of the test function in the original file.")
    t_orig: str
    t_simp: str
    tracker: List[Edit] = Field(default_factory=list)
    target_case: str = ""
    table_span: Optional[Tuple[int, int]] = Field(None, description="Case-table span within t_orig.")
    simplified: bool = False
    note: str = ""

    def apply_to_file(self, file_text: str, func_text: str) -> str:
        """Replace the test function in a file that still has the original layout before it."""
        data = file_text.encode("utf-8")
        start = self.func_span[0]
        end = start + len(self.t_orig.encode("utf-8"))
        if data[start:end].decode("utf-8") != self.t_orig:
            raise ValueError(f"{self.path} no longer holds the original {self.func} at byte {start}")
        return (data[:start] + func_text.encode("utf-8") + data[end:]).decode("utf-8")


def find_test_function(file_text: str, path: str, func: str) -> SubjectFunction:
    for fn in go_ast.parse_functions(file_text, path):
        if fn.kind == FunctionKind.NAMED and fn.name == func:
            return fn
    raise SelectorNotFound(f"test function {func} not found in {path}")


def unsimplified(fn: SubjectFunction, note: str = "") -> SimplifiedTest:
    return SimplifiedTest(
        path=fn.file, func=fn.name, func_span=fn.body_span, t_orig=fn.source, t_simp=fn.source, note=note,
    )


def simplify_test(file_text: str, path: str, func: str, case: str) -> SimplifiedTest:
    """
    Remove every sibling case of `case` from the test's case table.

    Tests without a recognised table come back unchanged with simplified=False.

    Raises:
        SelectorNotFound: the file has no function `func`.
        CaseNotFound: the table has no unique entry for `case`.
    """
    fn = find_test_function(file_text, path, func)
    if not case:
        return unsimplified(fn, "ticket names no case")
    try:
        table: CaseTable = find_table(fn.source, case=case, path=path)
    except TableNotFound as e:
        logger.warning(f"[SIMPLIFY] {func}: pattern not recognised ({e}); continuing unsimplified")
        return unsimplified(fn, "pattern not recognised")

    target = table.entry(case)
    edits = [
        Edit(start=e.removal_span[0], end=e.removal_span[1], tag=EditTag.REMOVAL)
        for e in table.entries if e is not target
    ]
    t_simp = apply_edits(fn.source, edits)
    try:
        go_ast.parse_function_snippet(t_simp, path)
    except ParseError as e:
        logger.warning(f"[SIMPLIFY] {func}: simplified text does not parse ({e}); continuing unsimplified")
        return unsimplified(fn, "simplified text did not parse")

    logger.info(f"[SIMPLIFY] {func}: kept case {target.name!r}, removed {len(edits)} sibling(s) from {table.shape.value} table")
    return SimplifiedTest(
        path=path,
        func=func,
        func_span=fn.body_span,
        t_orig=fn.source,
        t_simp=t_simp,
        tracker=edits,
        target_case=target.name,
        table_span=table.span,
        simplified=True,
    )


def neutralize_lines(text: str, first: int, last: int) -> str:
    lines = text.splitlines(keepends=True)
    for index in range(first - 1, last):
        lines[index] = RESTORE_MARKER + lines[index]
    return "".join(lines)


def neutralize_unused(adapter: SubjectAdapter, workspace: str, path: str) -> Tuple[str, int]:
    """
    Comment out declarations the compiler reports as unused in `path`,
    recompiling until the workspace builds.

    Returns the final file text and the number of neutralised declarations.

    Raises:
        NeutralizationDiverged: other diagnostics remain, an unused declaration
            cannot be commented out on its own, or the iteration cap is hit.
    """
    neutralized = 0
    for iteration in range(1, MAX_NEUTRALIZE_ITERATIONS + 1):
        diagnostics = adapter.compile(workspace)
        text = read_text(workspace, path)
        if not diagnostics:
            logger.info(f"[SIMPLIFY] {path} compiles after {iteration} build(s), {neutralized} declaration(s) neutralised")
            return text, neutralized
        blocking = [d for d in diagnostics if d.kind != DiagnosticKind.UNUSED_VARIABLE or d.file != path]
        if blocking:
            raise NeutralizationDiverged("; ".join(d.render() for d in blocking[:5]))

        spans = set()
        for diagnostic in diagnostics:
            span = go_ast.declaration_lines(text, diagnostic.line)
            if span is None:
                raise NeutralizationDiverged(f"cannot neutralise {diagnostic.render()}")
            spans.add(span)
        # Bottom-up keeps line numbers of the remaining spans valid.
        marked_from = None
        for first, last in sorted(spans, reverse=True):
            if marked_from is not None and last >= marked_from:
                continue
            text = neutralize_lines(text, first, last)
            marked_from = first
            neutralized += 1
        write_text(workspace, path, text)
    raise NeutralizationDiverged(f"{path} still fails to build after {MAX_NEUTRALIZE_ITERATIONS} iterations")

"""
Grafting a fix made on the simplified test back into the original test.

The fixed simplified function keeps everything it changed outside the case
table; the table itself comes back from the original, and the target case
inside it is replaced by the fixed case.
"""

import logging
import re
from typing import List, Set

from app.errors import CaseNotFound, MergeParseError, ParseError, TableNotFound
from app.logic.simplification import RESTORE_MARKER
from app.utils.go_ast import parse_function_snippet
from app.utils.go_tables import CaseEntry, CaseTable, find_table

logger = logging.getLogger(__name__)

IDENT_RE = re.compile(r"[A-Za-z_]\w*")


def _fixed_entry(table: CaseTable, target_case: str) -> CaseEntry:
    try:
        return table.entry(target_case)
    except CaseNotFound:
        if len(table.entries) == 1:
            # The fix renamed the case; the sole remaining entry is it.
            return table.entries[0]
        if not table.entries:
            raise CaseNotFound(f"the fixed test no longer contains case {target_case!r}")
        raise MergeParseError(f"cannot tell which of {table.names} is the fixed {target_case!r}")


def fixed_case_name(t_simp_fixed: str, target_case: str) -> str:
    """Name the target case carries in a fixed test; the old name when it cannot be told."""
    try:
        return _fixed_entry(find_table(t_simp_fixed, case=target_case), target_case).name
    except (TableNotFound, CaseNotFound, MergeParseError, ParseError):
        return target_case


def transplant(t_simp: str, t_simp_fixed: str, t_orig: str, target_case: str) -> str:
    """
    Patch(T_simp, T_simp', T_orig) -> T_orig'.

    Step one puts the original table into the fixed function, keeping fixes
    outside the table; step two puts the fixed target case into that table.

    Raises:
        TableNotFound: the original test has no case table.
        CaseNotFound: the fixed test dropped the target case.
        MergeParseError: the fixed test lost its table, holds several
            unmatched cases, or the merged text does not parse.
    """
    orig_table = find_table(t_orig, case=target_case)
    try:
        fixed_table = find_table(t_simp_fixed, case=target_case)
    except (TableNotFound, ParseError) as e:
        raise MergeParseError(f"fixed test has no usable case table: {e}")
    orig_entry = orig_table.entry(target_case)
    fixed_entry = _fixed_entry(fixed_table, target_case)

    orig = t_orig.encode("utf-8")
    fixed = t_simp_fixed.encode("utf-8")
    fixed_case = fixed[fixed_entry.span[0]:fixed_entry.span[1]]

    # Original table with the fixed case in place of the original one.
    table = (
        orig[orig_table.span[0]:orig_entry.span[0]]
        + fixed_case
        + orig[orig_entry.span[1]:orig_table.span[1]]
    )
    merged = (fixed[:fixed_table.span[0]] + table + fixed[fixed_table.span[1]:]).decode("utf-8")
    try:
        parse_function_snippet(merged, "<transplant>")
    except ParseError as e:
        raise MergeParseError(f"merged test does not parse: {e}")
    logger.info(f"[FIX] transplanted fixed case {fixed_entry.name!r} into {len(orig_table.entries)}-case table")
    return merged


def _declared_names(line: str) -> Set[str]:
    line = line.strip()
    if ":=" in line:
        return set(IDENT_RE.findall(line.split(":=", 1)[0])) - {"_"}
    for keyword in ("var", "const"):
        if line.startswith(keyword + " ") or line.startswith(keyword + "\t"):
            line = line[len(keyword):].strip()
            break
    import_match = re.match(r'^(?:import\s+)?(?:(?P<alias>[A-Za-z_]\w*)\s+)?"(?P<path>[^"]+)"', line)
    if import_match:
        return {import_match.group("alias") or import_match.group("path").rsplit("/", 1)[-1]}
    head = re.split(r"[=\s]", line, maxsplit=1)[0] if line else ""
    names = set(IDENT_RE.findall(line.split("=", 1)[0])) if "=" in line else {head}
    return {n for n in names if n and n != "_"}


def restore_neutralized(text: str, check_references: bool = False) -> str:
    """
    Undo neutralisation markers.

    By default every marked line is restored verbatim. With check_references,
    a run of marked lines is restored only when one of its declared names is
    referenced elsewhere in the file, and dropped otherwise.
    """
    if RESTORE_MARKER not in text:
        return text
    lines = text.splitlines(keepends=True)
    if not check_references:
        return "".join(line[len(RESTORE_MARKER):] if line.startswith(RESTORE_MARKER) else line for line in lines)

    groups: List[List[int]] = []
    for index, line in enumerate(lines):
        if not line.startswith(RESTORE_MARKER):
            continue
        if groups and groups[-1][-1] == index - 1:
            groups[-1].append(index)
        else:
            groups.append([index])

    marked = {i for group in groups for i in group}
    remaining = "".join(line for i, line in enumerate(lines) if i not in marked)
    keep, drop = set(), set()
    for group in groups:
        names: Set[str] = set()
        for index in group:
            names |= _declared_names(lines[index][len(RESTORE_MARKER):])
        if any(re.search(rf"\b{re.escape(n)}\b", remaining) for n in names):
            keep.update(group)
        else:
            drop.update(group)
    logger.info(f"[FIX] restored {len(keep)} and dropped {len(drop)} neutralised line(s)")
    result = []
    for index, line in enumerate(lines):
        if index in drop:
            continue
        result.append(line[len(RESTORE_MARKER):] if index in keep else line)
    return "".join(result)

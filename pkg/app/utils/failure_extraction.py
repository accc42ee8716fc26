"""
Failure information extraction from Go test output.

A regex pass driven by app/data/failure_patterns.json fills what it can;
when the mandatory fields stay empty, an optional LLM fallback reads the raw
output. Every candidate location is validated against the workspace.
"""

import json
import logging
import os
import re
from functools import lru_cache
from pathlib import Path, PurePosixPath
from typing import TYPE_CHECKING, List, Optional, Tuple

from app.errors import ExtractionFailed, FlakyRepairError, NoStatementAtLine
from app.models import FailureRecord
from app.utils.go_ast import statement_at_line
from app.utils.text_utils import collapse_whitespace

if TYPE_CHECKING:
    from app.llm.gateway import LLMGateway

logger = logging.getLogger(__name__)

PATTERNS_FILE = Path(__file__).resolve().parent.parent / "data" / "failure_patterns.json"


@lru_cache(maxsize=None)
def load_families(path: str = str(PATTERNS_FILE)) -> Tuple[dict, ...]:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    families = []
    for family in raw["families"]:
        flags = 0
        for name in family.get("flags", []):
            flags |= getattr(re, name)
        families.append({
            "name": family["name"],
            "pattern": re.compile(family["pattern"], flags),
            "location": re.compile(family["location"], re.MULTILINE) if family.get("location") else None,
            "stack": re.compile(family["stack"], flags) if family.get("stack") else None,
        })
    return tuple(families)


def resolve_workspace_path(workspace: str, raw_path: str, package_dir: str = "") -> Optional[str]:
    """
    Map a path printed by the runner onto a workspace-relative path.

    Handles paths relative to the package (t.Errorf prints base names),
    relative to the workspace, and absolute paths from any copy of the
    workspace (matched by the longest existing suffix).
    """
    root = Path(workspace)
    raw_path = raw_path.strip()
    if raw_path.startswith("./"):
        raw_path = raw_path[2:]
    parts = PurePosixPath(raw_path.replace(os.sep, "/")).parts
    if not parts:
        return None
    if not raw_path.startswith("/"):
        for candidate in (PurePosixPath(package_dir, raw_path) if package_dir else None, PurePosixPath(raw_path)):
            if candidate is not None and (root / candidate).is_file():
                return candidate.as_posix()
        return None
    real = os.path.realpath(raw_path)
    real_root = os.path.realpath(workspace)
    if real.startswith(real_root + os.sep):
        return PurePosixPath(os.path.relpath(real, real_root)).as_posix()
    for start in range(1, len(parts)):
        candidate = PurePosixPath(*parts[start:])
        if (root / candidate).is_file():
            return candidate.as_posix()
    return None


def _line_count(path: Path) -> int:
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        return sum(1 for _ in f)


def validate_location(workspace: str, raw_file: str, line: int, package_dir: str = "") -> Optional[str]:
    rel = resolve_workspace_path(workspace, raw_file, package_dir)
    if rel is None:
        return None
    if not 1 <= line <= _line_count(Path(workspace) / rel):
        return None
    return rel


def read_assertion_statement(workspace: str, file: str, line: int) -> str:
    """
    Full statement covering the line.

    Raises:
        NoStatementAtLine: the line is blank, a comment, or outside any statement.
    """
    text = (Path(workspace) / file).read_text(encoding="utf-8")
    return statement_at_line(text, line, file)


def _regex_pass(raw_output: str, workspace: str, package_dir: str) -> Tuple[dict, Optional[str]]:
    partial = {}
    for family in load_families():
        match = family["pattern"].search(raw_output)
        if not match:
            continue
        groups = match.groupdict()
        message = collapse_whitespace(groups.get("message") or "")
        if not message:
            continue
        stack = ""
        if family["stack"]:
            stack_match = family["stack"].search(raw_output)
            stack = stack_match.group("stack").strip() if stack_match else ""

        candidates: List[Tuple[str, int]] = []
        if groups.get("file"):
            candidates.append((groups["file"], int(groups["line"])))
        if family["location"]:
            candidates.extend((m.group("file"), int(m.group("line"))) for m in family["location"].finditer(raw_output))
        for raw_file, line in candidates:
            rel = validate_location(workspace, raw_file, line, package_dir)
            if rel:
                fields = {"message": message, "stack_trace": stack, "file": rel, "line": line}
                return fields, family["name"]
        if not partial:
            partial = {"message": message, "stack_trace": stack}
    return partial, None


def _llm_pass(raw_output: str, workspace: str, package_dir: str, fallback: "LLMGateway") -> Optional[dict]:
    from app.llm.parsers import parse_extraction
    from app.utils.prompt_utils import build_prompt

    prompt = build_prompt("EXTRACT", {"raw_output": raw_output[-12000:]})
    try:
        fields = parse_extraction(fallback.complete(prompt))
    except (ValueError, FlakyRepairError) as e:
        logger.warning(f"[REPRO] extraction fallback failed: {e}")
        return None
    if not fields["message"] or not fields["file"]:
        return None
    rel = validate_location(workspace, fields["file"], fields["line"], package_dir)
    if rel is None:
        logger.warning(f"[REPRO] extraction fallback named {fields['file']}:{fields['line']}, which is not in the workspace")
        return None
    fields["file"] = rel
    return fields


def extract_failure_info(
    raw_output: str,
    workspace: str,
    package_dir: str = "",
    test_func_file: str = "",
    fallback: Optional["LLMGateway"] = None,
) -> FailureRecord:
    """
    Build a FailureRecord from a failing run's output.

    Raises:
        ExtractionFailed: neither the regex pass nor the fallback produced a
            message with a location that exists in the workspace.
    """
    if not raw_output.strip():
        raise ExtractionFailed("empty test output")
    fields, family = _regex_pass(raw_output, workspace, package_dir)
    if "file" not in fields and fallback is not None:
        llm_fields = _llm_pass(raw_output, workspace, package_dir, fallback)
        if llm_fields:
            fields, family = llm_fields, "llm"
    if "file" not in fields:
        raise ExtractionFailed("no failure message with a workspace location in the output")

    try:
        statement = read_assertion_statement(workspace, fields["file"], fields["line"])
    except NoStatementAtLine:
        lines = (Path(workspace) / fields["file"]).read_text(encoding="utf-8").splitlines()
        statement = lines[fields["line"] - 1].strip()
    logger.debug(f"[REPRO] extracted {family} failure at {fields['file']}:{fields['line']}")
    return FailureRecord(
        message=fields["message"],
        stack_trace=fields.get("stack_trace", ""),
        assertion_file=fields["file"],
        assertion_line=fields["line"],
        test_func_file=test_func_file,
        assertion_stmt=statement,
    )

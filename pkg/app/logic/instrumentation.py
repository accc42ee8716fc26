"""
Source instrumentation for dynamic call-graph capture.

The pristine workspace is copied to a shadow workspace; in the shadow every
function body starts with a call to the recorder and the recorder package is
added. Injected text never introduces a newline, so every line number in
the shadow matches the original.
"""

import logging
import os
import re
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

from pydantic import BaseModel, Field

from app.adapters.go_adapter import GoAdapter, module_path
from app.adapters.go_recorder import LOG_ENV_VAR, RECORDER_FILE, RECORDER_PACKAGE, recorder_source
from app.errors import InjectionConflict, InstrumentationError
from app.models import Scope, TestId, Verdict
from app.utils import go_ast
from app.utils.clock_utils import Deadline
from app.utils.edit_utils import Edit, EditTag, apply_edits
from app.utils.workspace_utils import copy_workspace, read_text, write_text

logger = logging.getLogger(__name__)

ENTER_CALL = RECORDER_PACKAGE + '.Enter("{file}", {line}, "{name}"); '
IMPORT_CLAUSE = '; import {alias} "{module}/{package}"'
ENTER_RE = re.compile(re.escape(RECORDER_PACKAGE) + r'\.Enter\("[^"]*", \d+, "[^"]*"\); ')
IMPORT_RE = re.compile(r'; import ' + re.escape(RECORDER_PACKAGE) + r' "[^"]*/' + re.escape(RECORDER_PACKAGE) + r'"')
COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.DOTALL)


class ManifestEntry(BaseModel):
    file: str
    decl_line: int
    name: str


class InstrumentationManifest(BaseModel):
    entries: List[ManifestEntry] = Field(default_factory=list)
    skipped: List[ManifestEntry] = Field(default_factory=list, description="Functions with empty or missing bodies.")
    support_units: List[str] = Field(default_factory=list)
    log_path: str


def _block_is_empty(source: bytes, block_span: Tuple[int, int]) -> bool:
    inner = source[block_span[0] + 1:block_span[1] - 1].decode("utf-8", errors="replace")
    return not COMMENT_RE.sub("", inner).strip()


def instrument_file(text: str, path: str, module: str) -> Tuple[str, List[ManifestEntry], List[ManifestEntry]]:
    """
    Inject the recorder call at the start of every function body in one file.

    Returns the instrumented text with the entries and the skipped functions.
    The import is added on the package-clause line only when a call was injected.

    Raises:
        ParseError: the file does not parse.
        InjectionConflict: the file already contains recorder calls.
    """
    if ENTER_RE.search(text) or IMPORT_RE.search(text):
        raise InjectionConflict(f"{path} is already instrumented")
    source = text.encode("utf-8")
    functions = go_ast.parse_functions(text, path)

    edits: List[Edit] = []
    entries, skipped = [], []
    for fn in functions:
        entry = ManifestEntry(file=path, decl_line=fn.decl_line, name=fn.name)
        if fn.block_span is None or _block_is_empty(source, fn.block_span):
            skipped.append(entry)
            continue
        if '"' in fn.name or '"' in path:
            raise InjectionConflict(f"cannot encode {fn.name} in {path} as a string literal")
        call = ENTER_CALL.format(file=path, line=fn.decl_line, name=fn.name)
        edits.append(Edit(start=fn.block_span[0] + 1, end=fn.block_span[0] + 1, replacement=call, tag=EditTag.OTHER))
        entries.append(entry)

    if edits:
        tree = go_ast.parse_bytes(source)
        clause = next((n for n in tree.root_node.named_children if n.type == "package_clause"), None)
        if clause is None:
            raise InstrumentationError(f"{path} has no package clause")
        edits.append(Edit(
            start=clause.end_byte,
            end=clause.end_byte,
            replacement=IMPORT_CLAUSE.format(alias=RECORDER_PACKAGE, module=module, package=RECORDER_PACKAGE),
        ))
    return apply_edits(text, edits), entries, skipped


def strip_instrumentation(text: str) -> str:
    """Inverse of instrument_file."""
    return IMPORT_RE.sub("", ENTER_RE.sub("", text))


def check_instrumentable(
    workspace: str,
    packages: Optional[Iterable[str]] = None,
    adapter: Optional[GoAdapter] = None,
) -> int:
    """
    Parse every source file that instrumentation would touch; returns the file count.

    Raises:
        ParseError: a file in scope does not parse.
    """
    adapter = adapter or GoAdapter()
    files = adapter.source_files(workspace, packages)
    for rel in files:
        go_ast.parse_functions(read_text(workspace, rel), rel)
    return len(files)


def instrument_workspace(
    workspace: str,
    packages: Optional[Iterable[str]] = None,
    adapter: Optional[GoAdapter] = None,
) -> Tuple[str, InstrumentationManifest]:
    """
    Build an instrumented shadow copy of the workspace.

    Args:
        workspace: pristine workspace root (left untouched)
        packages: package directories to instrument; None means every package

    Raises:
        InstrumentationError: no go.mod, or the recorder package already exists.
        ParseError: a file in scope does not parse.
    """
    adapter = adapter or GoAdapter()
    module = module_path(workspace)
    if not module:
        raise InstrumentationError(f"{workspace} has no go.mod with a module path")
    if (Path(workspace) / RECORDER_PACKAGE).exists():
        raise InstrumentationError(f"{workspace} already contains a {RECORDER_PACKAGE} directory")

    shadow = copy_workspace(workspace, prefix="flaky-mender-shadow-")
    log_dir = Path(shadow) / ".flakytrace"
    log_dir.mkdir(parents=True, exist_ok=True)
    manifest = InstrumentationManifest(log_path=str((log_dir / "edges.log").resolve()))

    for rel in adapter.source_files(shadow, packages):
        text = read_text(shadow, rel)
        instrumented, entries, skipped = instrument_file(text, rel, module)
        if entries:
            write_text(shadow, rel, instrumented)
        manifest.entries.extend(entries)
        manifest.skipped.extend(skipped)

    unit = f"{RECORDER_PACKAGE}/{RECORDER_FILE}"
    write_text(shadow, unit, recorder_source(manifest.log_path, module))
    manifest.support_units.append(unit)
    logger.info(f"[TRACE] instrumented {len(manifest.entries)} functions ({len(manifest.skipped)} skipped) in {shadow}")
    return shadow, manifest


class TraceResult(BaseModel):
    log_path: Optional[str] = None
    runs_tried: int = 0
    labelled_logs: List[str] = Field(default_factory=list)


def capture_failing_trace(
    adapter: GoAdapter,
    shadow: str,
    test: TestId,
    scope: Scope,
    max_runs: int,
    race: bool,
    timeout: float,
    deadline: Optional[Deadline] = None,
) -> TraceResult:
    """
    Run the instrumented test one process at a time until a run fails.

    Each run writes to its own log, renamed to run-<i>.fail.log or
    run-<i>.pass.log by verdict. Only the failing log feeds the graph.
    """
    log_dir = Path(shadow) / ".flakytrace"
    log_dir.mkdir(parents=True, exist_ok=True)
    result = TraceResult()
    for index in range(max_runs):
        if deadline is not None:
            deadline.check(f"instrumented run {index + 1}")
        raw_log = log_dir / f"run-{index}.log"
        if raw_log.exists():
            raw_log.unlink()
        outcomes = adapter.run_test(shadow, test, scope, 1, race, timeout, env={LOG_ENV_VAR: str(raw_log)})
        result.runs_tried = index + 1
        verdict = outcomes[0].verdict if outcomes else Verdict.PASS
        if verdict == Verdict.BUILD_ERROR:
            raise InstrumentationError(f"instrumented workspace does not build:\n{outcomes[0].raw_output[-2000:]}")
        label = "fail" if verdict in (Verdict.FAIL, Verdict.TIMEOUT) else "pass"
        labelled = log_dir / f"run-{index}.{label}.log"
        if raw_log.exists():
            os.replace(raw_log, labelled)
        else:
            labelled.write_text("", encoding="utf-8")
        result.labelled_logs.append(str(labelled))
        if label == "fail":
            result.log_path = str(labelled)
            logger.info(f"[TRACE] captured failing trace on instrumented run {index + 1}")
            return result
    logger.warning(f"[TRACE] no failing run in {max_runs} instrumented runs of {test.render()}")
    return result

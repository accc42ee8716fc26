"""
Dynamic call graph construction from recorder logs.

Nodes are function declarations keyed by (file, line). Runtime edges come
from the log; async edges are inferred from goroutine launch statements,
which the runtime stack cannot attribute to their launcher.
"""

import logging
import re
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field

from app.adapters.go_recorder import ERROR_SENTINEL
from app.adapters.interface import SubjectAdapter
from app.errors import InstrumentationError, MalformedLine, ParseError, UnresolvedNode
from app.logic.instrumentation import capture_failing_trace, instrument_workspace
from app.models import AsyncLaunchSite, NodeId, Scope, SubjectFunction, TestId
from app.utils.clock_utils import Deadline
from app.utils.workspace_utils import remove_workspace

logger = logging.getLogger(__name__)

RECORD_RE = re.compile(
    r"^MethodEntry: (?P<cf>[^,]+), (?P<cl>\d+), (?P<cn>[^,\s]+) "
    r"Caller: (?P<rf>[^,]+), (?P<rl>\d+), (?P<rn>[^,\s]+)$"
)


class Site(BaseModel):
    model_config = ConfigDict(frozen=True)

    file: str
    line: int
    name: str

    @property
    def node_id(self) -> NodeId:
        return NodeId(self.file, self.line)

    @property
    def is_root(self) -> bool:
        return self.file == "-" and self.line == 0 and self.name == "-"


ROOT_SITE = Site(file="-", line=0, name="-")


class RawEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    caller: Site
    callee: Site
    text: str = ""

    def render(self) -> str:
        return (f"MethodEntry: {self.callee.file}, {self.callee.line}, {self.callee.name} "
                f"Caller: {self.caller.file}, {self.caller.line}, {self.caller.name}")


class ParsedLog(BaseModel):
    edges: List[RawEdge] = Field(default_factory=list)
    malformed: int = 0
    recorder_errors: int = 0


def parse_log(lines: Iterable[str], strict: bool = True) -> ParsedLog:
    """
    Parse recorder lines into raw edges, in order.

    Raises:
        MalformedLine: in strict mode, for the first line outside the grammar.
    """
    parsed = ParsedLog()
    for number, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        if line == ERROR_SENTINEL:
            parsed.recorder_errors += 1
            continue
        match = RECORD_RE.match(line)
        if not match:
            if strict:
                raise MalformedLine(number, line)
            parsed.malformed += 1
            continue
        callee = Site(file=match.group("cf"), line=int(match.group("cl")), name=match.group("cn"))
        caller = Site(file=match.group("rf"), line=int(match.group("rl")), name=match.group("rn"))
        if callee.is_root:
            if strict:
                raise MalformedLine(number, line)
            parsed.malformed += 1
            continue
        parsed.edges.append(RawEdge(caller=ROOT_SITE if caller.is_root else caller, callee=callee, text=line))
    if parsed.malformed or parsed.recorder_errors:
        logger.warning(f"[DCG] skipped {parsed.malformed} malformed and {parsed.recorder_errors} recorder-error line(s)")
    return parsed


def read_log(path: str, strict: bool = False) -> ParsedLog:
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        return parse_log(f, strict=strict)


class EdgeKind(str, Enum):
    RUNTIME = "runtime"
    ASYNC_INFERRED = "async-inferred"


class CallEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    caller: NodeId
    callee: NodeId
    kind: EdgeKind = EdgeKind.RUNTIME


class AsyncAmbiguity(BaseModel):
    site: AsyncLaunchSite
    matches: List[NodeId]


class FunctionIndex:
    """Lazily parsed (file, decl_line) → SubjectFunction lookup over a workspace."""

    def __init__(self, workspace: str, adapter: SubjectAdapter):
        self.workspace = workspace
        self.adapter = adapter
        self._files: Dict[str, Optional[Dict[int, SubjectFunction]]] = {}
        self._texts: Dict[str, str] = {}

    def text(self, file: str) -> str:
        self.functions_in(file)
        return self._texts.get(file, "")

    def functions_in(self, file: str) -> Optional[Dict[int, SubjectFunction]]:
        if file not in self._files:
            path = Path(self.workspace) / file
            if not path.is_file():
                self._files[file] = None
                return None
            text = path.read_text(encoding="utf-8")
            by_line: Dict[int, SubjectFunction] = {}
            try:
                functions = self.adapter.parse_functions(text, file)
            except ParseError as e:
                logger.warning(f"[DCG] cannot parse {file}: {e}")
                functions = []
            for fn in functions:
                if fn.decl_line in by_line:
                    # Several literals on one line share an id; the first one wins.
                    logger.warning(f"[DCG] {file}:{fn.decl_line} declares both {by_line[fn.decl_line].name} and {fn.name}")
                    continue
                by_line[fn.decl_line] = fn
            self._files[file] = by_line
            self._texts[file] = text
        return self._files[file]

    def lookup(self, node: NodeId) -> Optional[SubjectFunction]:
        functions = self.functions_in(node.file)
        return functions.get(node.line) if functions else None


class DynamicCallGraph:
    """
    Functions executed in a failing run and the calls between them.

    Child order is the order edges first appeared in the log, with inferred
    async edges after runtime edges.
    """

    def __init__(self, test_node: Optional[NodeId] = None):
        self.nodes: Dict[NodeId, SubjectFunction] = {}
        self.edges: Dict[Tuple[NodeId, NodeId], CallEdge] = {}
        self._children: Dict[NodeId, List[NodeId]] = {}
        self._parents: Dict[NodeId, List[NodeId]] = {}
        self._first_seen: List[NodeId] = []
        self.test_node = test_node
        self.ambiguities: List[AsyncAmbiguity] = []

    def add_node(self, fn: SubjectFunction) -> NodeId:
        node = fn.node_id
        if node not in self.nodes:
            self.nodes[node] = fn
            self._children[node] = []
            self._parents[node] = []
            self._first_seen.append(node)
        return node

    def add_edge(self, caller: NodeId, callee: NodeId, kind: EdgeKind = EdgeKind.RUNTIME) -> bool:
        if (caller, callee) in self.edges:
            return False
        self.edges[(caller, callee)] = CallEdge(caller=caller, callee=callee, kind=kind)
        self._children[caller].append(callee)
        self._parents[callee].append(caller)
        return True

    def children(self, node: NodeId) -> List[NodeId]:
        return list(self._children.get(node, []))

    def parents(self, node: NodeId) -> List[NodeId]:
        return list(self._parents.get(node, []))

    @property
    def roots(self) -> List[NodeId]:
        roots = [n for n in self._first_seen if not self._parents[n]]
        if self.test_node in roots:
            roots.remove(self.test_node)
            roots.insert(0, self.test_node)
        return roots

    def edge_set(self) -> Set[CallEdge]:
        return set(self.edges.values())

    def node_label(self, node: NodeId) -> str:
        fn = self.nodes[node]
        return f"{fn.name}@{node.file}:{node.line}"


def build_graph(
    raw_edges: Iterable[RawEdge],
    index: FunctionIndex,
    test_node: Optional[NodeId] = None,
) -> DynamicCallGraph:
    """
    Bind raw edges to parsed functions.

    Raises:
        UnresolvedNode: a record names a (file, line) without a function declaration.
    """
    graph = DynamicCallGraph(test_node=test_node)
    for edge in raw_edges:
        ids = []
        for site in (edge.caller, edge.callee):
            if site.is_root:
                ids.append(None)
                continue
            fn = index.lookup(site.node_id)
            if fn is None:
                raise UnresolvedNode(site.file, site.line, edge.text or edge.render())
            ids.append(graph.add_node(fn))
        caller, callee = ids
        if caller is not None:
            graph.add_edge(caller, callee, EdgeKind.RUNTIME)
    logger.info(f"[DCG] graph with {len(graph.nodes)} nodes and {len(graph.edges)} edges")
    return graph


def infer_async_edges(graph: DynamicCallGraph, index: FunctionIndex) -> DynamicCallGraph:
    """
    Link goroutine launchers to the launched functions by unqualified name.

    An edge is added only when exactly one graph node matches the launch
    site's callee name; ambiguous matches are recorded on the graph.
    """
    by_short_name: Dict[str, List[NodeId]] = {}
    for node, fn in graph.nodes.items():
        by_short_name.setdefault(fn.short_name, []).append(node)

    recorded = {(a.site.file, a.site.line, a.site.callee_name) for a in graph.ambiguities}
    added = 0
    for node, fn in list(graph.nodes.items()):
        for site in index.adapter.find_async_launches(index.text(fn.file), fn):
            matches = [m for m in by_short_name.get(site.callee_name, []) if m != node]
            if len(matches) == 1:
                if graph.add_edge(node, matches[0], EdgeKind.ASYNC_INFERRED):
                    added += 1
            elif len(matches) > 1 and (site.file, site.line, site.callee_name) not in recorded:
                graph.ambiguities.append(AsyncAmbiguity(site=site, matches=matches))
                recorded.add((site.file, site.line, site.callee_name))
    if added or graph.ambiguities:
        logger.info(f"[DCG] inferred {added} async edge(s); {len(graph.ambiguities)} ambiguous launch(es)")
    return graph


def graph_stats(graph: DynamicCallGraph) -> Tuple[int, int, int]:
    """
    (node_count, edge_count, max_depth); max_depth counts edges on the longest
    root-to-leaf path that never revisits a node on the current path.

    Iterative depth-first search: edges back to a node still on the stack
    are dropped, every other edge contributes through the finished child.
    """
    starts = graph.roots or list(graph.nodes)
    longest: Dict[NodeId, int] = {}
    on_stack: Set[NodeId] = set()

    for start in starts:
        if start in longest:
            continue
        on_stack.add(start)
        stack: List[Tuple[NodeId, List[NodeId], List[NodeId]]] = [(start, graph.children(start)[::-1], [])]
        while stack:
            node, pending, kept = stack[-1]
            if pending:
                child = pending.pop()
                if child in on_stack:
                    continue
                kept.append(child)
                if child not in longest:
                    on_stack.add(child)
                    stack.append((child, graph.children(child)[::-1], []))
                continue
            stack.pop()
            on_stack.discard(node)
            longest[node] = max((1 + longest[c] for c in kept), default=0)

    max_depth = max((longest[r] for r in starts), default=0)
    return len(graph.nodes), len(graph.edges), max_depth


def to_dot(graph: DynamicCallGraph) -> str:
    lines = ["digraph dcg {", "  node [shape=box];"]
    ids = {node: f"n{i}" for i, node in enumerate(graph.nodes)}
    for node in graph.nodes:
        lines.append(f'  {ids[node]} [label="{graph.node_label(node)}"];')
    for edge in graph.edges.values():
        style = " [style=dashed]" if edge.kind == EdgeKind.ASYNC_INFERRED else ""
        lines.append(f"  {ids[edge.caller]} -> {ids[edge.callee]}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def trace_call_graph(
    adapter: SubjectAdapter,
    workspace: str,
    test: TestId,
    scope: Scope,
    test_fn: SubjectFunction,
    trace_runs: int,
    race: bool,
    timeout: float,
    deadline: Optional[Deadline] = None,
) -> DynamicCallGraph:
    """
    Instrument a shadow copy, capture one failing run and build its graph.

    Raises:
        InstrumentationError: the shadow does not build or no run failed.
        TimeLimitExceeded: the deadline passed between instrumented runs.
        ParseError, UnresolvedNode: the workspace cannot be mapped.
    """
    shadow, _ = instrument_workspace(workspace, adapter=adapter)
    try:
        trace = capture_failing_trace(adapter, shadow, test, scope, trace_runs, race, timeout, deadline)
        if trace.log_path is None:
            raise InstrumentationError(f"no failing run in {trace.runs_tried} instrumented run(s)")
        parsed = read_log(trace.log_path, strict=False)
    finally:
        remove_workspace(shadow)
    index = FunctionIndex(workspace, adapter)
    graph = build_graph(parsed.edges, index, test_node=test_fn.node_id)
    graph.add_node(test_fn)
    return infer_async_edges(graph, index)

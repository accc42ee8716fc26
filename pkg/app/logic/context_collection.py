"""
Context collection: oracle-guided breadth-first traversal of the dynamic
call graph, followed by a global filter that caps the production context.
"""

import logging
from abc import ABC, abstractmethod
from collections import deque
from typing import Deque, List, Optional, Set, Tuple

from app.config import Strategy, TraversalConfig
from app.errors import OracleFailure
from app.llm.parsers import parse_selection
from app.logic.call_graph import DynamicCallGraph
from app.models import ContextBundle, FailureRecord, NodeId, SubjectFunction, TestId
from app.utils.prompt_utils import build_prompt, get_prompt
from app.utils.text_utils import head_lines

logger = logging.getLogger(__name__)

ORACLE_RETRIES = 2
HEAD_LINES = 5


def render_evidence(test: TestId, failure: Optional[FailureRecord]) -> str:
    if failure is None:
        return get_prompt("EVIDENCE", {"test": test.render(), "message": "(no failure message was extracted)"})
    return get_prompt("EVIDENCE", {
        "test": test.render(),
        "message": failure.message,
        "assertion_file": failure.assertion_file,
        "assertion_line": failure.assertion_line,
        "assertion_stmt": failure.assertion_stmt,
        "stack_trace": failure.stack_trace,
    })


def render_candidates(candidates: List[SubjectFunction]) -> str:
    """Numbered list: index, qualified name, file:line and the first lines of source."""
    blocks = []
    for index, fn in enumerate(candidates, start=1):
        blocks.append(f"{index}. {fn.name} ({fn.file}:{fn.decl_line})\n```go\n{head_lines(fn.source, HEAD_LINES)}\n```")
    return "\n\n".join(blocks)


class SelectionOracle(ABC):
    """Chooses candidate indices (0-based) for the traversal and the global filter."""

    @abstractmethod
    def select(self, parent: SubjectFunction, candidates: List[SubjectFunction], k: int) -> List[int]:
        pass

    @abstractmethod
    def select_global(self, candidates: List[SubjectFunction], limit: int) -> List[int]:
        pass


class SelectAllOracle(SelectionOracle):
    """Plain BFS over the graph: every child is taken, and the filter keeps the first ones."""

    def select(self, parent: SubjectFunction, candidates: List[SubjectFunction], k: int) -> List[int]:
        return list(range(len(candidates)))

    def select_global(self, candidates: List[SubjectFunction], limit: int) -> List[int]:
        return list(range(min(limit, len(candidates))))


class LLMSelectionOracle(SelectionOracle):
    def __init__(self, gateway, evidence: str, guidance: str = ""):
        self.gateway = gateway
        self.evidence = evidence
        self.guidance = guidance

    def select(self, parent: SubjectFunction, candidates: List[SubjectFunction], k: int) -> List[int]:
        prompt = build_prompt("SELECT", {
            "evidence": self.evidence,
            "guidance": self.guidance,
            "parent": f"{parent.name} ({parent.file}:{parent.decl_line})",
            "k": k,
            "candidates": render_candidates(candidates),
        })
        return [i - 1 for i in parse_selection(self.gateway.complete(prompt), len(candidates), k)]

    def select_global(self, candidates: List[SubjectFunction], limit: int) -> List[int]:
        prompt = build_prompt("FILTER", {
            "evidence": self.evidence,
            "guidance": self.guidance,
            "candidates": render_candidates(candidates),
            "F": limit,
        })
        return [i - 1 for i in parse_selection(self.gateway.complete(prompt), len(candidates), limit)]


def _ask(call, cap: int, fallback_size: int, what: str, fallbacks: List[str]) -> List[int]:
    """Run an oracle call with retries; fall back to the first candidates."""
    last_error = None
    for _ in range(1 + ORACLE_RETRIES):
        try:
            picked = call()
        except OracleFailure as e:
            last_error = e
            continue
        if len(picked) <= cap and len(set(picked)) == len(picked):
            return picked
        last_error = OracleFailure(f"oracle returned {len(picked)} picks for a cap of {cap}")
    note = f"{what}: {last_error}; kept the first {fallback_size} candidate(s)"
    logger.warning(f"[CONTEXT] oracle fallback for {note}")
    fallbacks.append(note)
    return list(range(fallback_size))


def collect_context(
    graph: DynamicCallGraph,
    cfg: TraversalConfig,
    oracle: SelectionOracle,
    fallbacks: Optional[List[str]] = None,
) -> List[NodeId]:
    """
    Breadth-first traversal from the roots where the oracle picks at most k
    children of each expanded node. Nodes already selected are never offered
    again, so cyclic graphs terminate.

    Returns the selection order L, roots first.
    """
    fallbacks = fallbacks if fallbacks is not None else []
    if cfg.strategy == Strategy.BFS_ALL:
        oracle = SelectAllOracle()
    select_all = isinstance(oracle, SelectAllOracle)

    roots = graph.roots
    selected: List[NodeId] = list(roots)
    visited: Set[NodeId] = set(roots)
    queue: Deque[Tuple[NodeId, int]] = deque((r, 0) for r in roots)
    while queue:
        node, depth = queue.popleft()
        if cfg.d is not None and depth >= cfg.d:
            continue
        children = [c for c in graph.children(node) if c not in visited]
        if not children:
            continue
        candidates = [graph.nodes[c] for c in children]
        cap = len(candidates) if select_all else cfg.k
        picked = _ask(
            lambda: oracle.select(graph.nodes[node], candidates, cfg.k),
            cap,
            min(cfg.k, len(candidates)),
            f"children of {graph.node_label(node)}",
            fallbacks,
        )
        for index in picked:
            child = children[index]
            if child in visited:
                continue
            visited.add(child)
            selected.append(child)
            queue.append((child, depth + 1))
    logger.info(f"[CONTEXT] traversal selected {len(selected) - len(roots)} node(s) beyond {len(roots)} root(s)")
    return selected


def global_filter(
    selected: List[NodeId],
    graph: DynamicCallGraph,
    cfg: TraversalConfig,
    oracle: SelectionOracle,
    fallbacks: Optional[List[str]] = None,
) -> List[NodeId]:
    """
    Keep the roots plus at most F of the other selected nodes, in selection order.

    No oracle call is made when the remainder already fits within F.
    """
    fallbacks = fallbacks if fallbacks is not None else []
    if cfg.strategy == Strategy.BFS_ALL:
        oracle = SelectAllOracle()
    roots = set(graph.roots)
    root_part = [n for n in selected if n in roots]
    rest = [n for n in selected if n not in roots]
    if cfg.F == 0:
        return root_part
    if len(rest) <= cfg.F:
        return root_part + rest

    picked = _ask(
        lambda: oracle.select_global([graph.nodes[n] for n in rest], cfg.F),
        cfg.F,
        cfg.F,
        "global filter",
        fallbacks,
    )
    keep = {rest[i] for i in picked}
    final = root_part + [n for n in rest if n in keep]
    logger.info(f"[CONTEXT] global filter kept {len(keep)} of {len(rest)} node(s)")
    return final


def _inside(fn: SubjectFunction, test_fn: Optional[SubjectFunction]) -> bool:
    if test_fn is None or fn.file != test_fn.file:
        return False
    last_line = test_fn.decl_line + test_fn.source.count("\n")
    return test_fn.decl_line <= fn.decl_line <= last_line


def render_bundle(graph: DynamicCallGraph, final: List[NodeId], test_fn: Optional[SubjectFunction] = None) -> str:
    """
    Labelled source blocks for the prompt. Roots declared inside the test
    function are skipped; the test is shown on its own.
    """
    roots = set(graph.roots)
    blocks = []
    for node in final:
        fn = graph.nodes[node]
        if node in roots and _inside(fn, test_fn):
            continue
        blocks.append(f"=== {fn.name} ({fn.file}:{fn.decl_line}) ===\n{fn.source}")
    return "\n\n".join(blocks)


def build_context(
    graph: DynamicCallGraph,
    cfg: TraversalConfig,
    oracle: SelectionOracle,
    test_fn: Optional[SubjectFunction] = None,
) -> ContextBundle:
    fallbacks: List[str] = []
    ordered = collect_context(graph, cfg, oracle, fallbacks)
    final = global_filter(ordered, graph, cfg, oracle, fallbacks)
    return ContextBundle(
        ordered=ordered,
        final=final,
        rendered=render_bundle(graph, final, test_fn),
        fallbacks=fallbacks,
    )

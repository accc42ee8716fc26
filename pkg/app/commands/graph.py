import json
import logging

from app.commands import CommandContext, ExitCode
from app.commands.reproduce import reproduce_ticket
from app.errors import InstrumentationError, ParseError, TimeLimitExceeded, UnresolvedNode
from app.logic.call_graph import DynamicCallGraph, EdgeKind, graph_stats, to_dot, trace_call_graph
from app.logic.instrumentation import check_instrumentable
from app.models import TestId
from app.utils.clock_utils import Deadline

logger = logging.getLogger(__name__)


def serialize_stats(graph: DynamicCallGraph) -> str:
    nodes, edges, max_depth = graph_stats(graph)
    document = {
        "nodes": nodes,
        "edges": edges,
        "max_depth": max_depth,
        "async_edges": sum(1 for e in graph.edges.values() if e.kind == EdgeKind.ASYNC_INFERRED),
        "ambiguous_launches": [
            {
                "site": f"{a.site.file}:{a.site.line}",
                "callee": a.site.callee_name,
                "matches": [m.label() for m in a.matches],
            }
            for a in graph.ambiguities
        ],
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def cmd_graph(ctx: CommandContext, test: TestId) -> ExitCode:
    """Reproduce, trace one failing instrumented run and export the call graph."""
    cfg = ctx.settings.pipeline
    deadline = Deadline(cfg.time_limit, ctx.clock)
    try:
        check_instrumentable(ctx.workspace, adapter=ctx.adapter)
    except ParseError as e:
        logger.error(f"[CLI] {test.render()}: workspace cannot be instrumented: {e}")
        return ExitCode.INSTRUMENTATION_FAILED
    try:
        report = reproduce_ticket(ctx, test, deadline)
    except TimeLimitExceeded as e:
        logger.error(f"[CLI] {test.render()}: {e}")
        return ExitCode.EXHAUSTED
    if not report.reproduced:
        return ExitCode.NOT_REPRODUCED

    try:
        _, test_fn = ctx.adapter.locate_test_function(ctx.workspace, test)
        graph = trace_call_graph(
            ctx.adapter, ctx.workspace, test, report.scope_used, test_fn, cfg.trace_budget, cfg.race, cfg.per_run_timeout,
            deadline=deadline,
        )
    except TimeLimitExceeded as e:
        logger.error(f"[CLI] {test.render()}: {e}")
        return ExitCode.EXHAUSTED
    except (InstrumentationError, ParseError, UnresolvedNode) as e:
        logger.error(f"[CLI] {test.render()}: call graph failed: {e}")
        return ExitCode.INSTRUMENTATION_FAILED

    ctx.write_artifact(test, "graph.dot", to_dot(graph))
    ctx.write_artifact(test, "graph_stats.json", serialize_stats(graph))
    nodes, edges, max_depth = graph_stats(graph)
    logger.info(f"[CLI] {test.render()}: {nodes} nodes, {edges} edges, depth {max_depth}")
    return ExitCode.OK

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.adapters.go_recorder import ERROR_SENTINEL
from app.errors import InstrumentationError, MalformedLine, TimeLimitExceeded, UnresolvedNode
from app.logic.call_graph import (
    ROOT_SITE,
    EdgeKind,
    FunctionIndex,
    RawEdge,
    Site,
    build_graph,
    graph_stats,
    infer_async_edges,
    parse_log,
    to_dot,
    trace_call_graph,
)
from app.models import NodeId, Scope, TestId, Verdict
from app.utils.go_ast import parse_functions
from app.utils.clock_utils import Deadline
from tests.support import GOSHOP, FakeAdapter, FakeClock, TracingAdapter, always, graph_from_edges, node

TEST_FILE = "program/program_test.go"
ANON = f"{TEST_FILE}, 25, TestAddProgram$anon1"

# A failing run of TestAddProgram/stored_program as the recorder writes it.
GOSHOP_LOG = [
    f"MethodEntry: {TEST_FILE}, 8, TestAddProgram Caller: -, 0, -",
    f"MethodEntry: {ANON} Caller: -, 0, -",
    f"MethodEntry: program/db.go, 13, NewMemoryDB Caller: {ANON}",
    f"MethodEntry: program/controller.go, 21, NewController Caller: {ANON}",
    f"MethodEntry: program/handler.go, 9, NewHandler Caller: {ANON}",
    f"MethodEntry: program/handler.go, 13, Handler.AddProgram Caller: {ANON}",
    "MethodEntry: program/controller.go, 25, Controller.AddProgram Caller: program/handler.go, 13, Handler.AddProgram",
    "MethodEntry: program/controller.go, 33, ValidateIdentity Caller: program/controller.go, 25, Controller.AddProgram",
    "MethodEntry: program/db.go, 17, MemoryDB.UpdateInfo Caller: -, 0, -",
    f"MethodEntry: program/db.go, 23, MemoryDB.Get Caller: {ANON}",
]


def goshop_graph():
    index = FunctionIndex(str(GOSHOP), FakeAdapter())
    test_node = NodeId(TEST_FILE, 8)
    graph = build_graph(parse_log(GOSHOP_LOG).edges, index, test_node=test_node)
    return infer_async_edges(graph, index), index


def test_parse_log_reads_edges_in_order():
    parsed = parse_log(GOSHOP_LOG)
    assert len(parsed.edges) == len(GOSHOP_LOG)
    assert parsed.edges[0].caller == ROOT_SITE
    assert parsed.edges[6].callee == Site(file="program/controller.go", line=25, name="Controller.AddProgram")
    assert parsed.edges[6].caller.name == "Handler.AddProgram"


def test_parse_log_strict_and_lenient():
    lines = GOSHOP_LOG[:2] + ["garbage", ERROR_SENTINEL, "MethodEntry: -, 0, - Caller: -, 0, -"]
    with pytest.raises(MalformedLine) as info:
        parse_log(lines, strict=True)
    assert info.value.line_number == 3
    parsed = parse_log(lines, strict=False)
    assert len(parsed.edges) == 2
    assert parsed.malformed == 2
    assert parsed.recorder_errors == 1


sites = st.builds(
    Site,
    file=st.sampled_from(["a.go", "pkg/b.go", "pkg/sub/c_test.go"]),
    line=st.integers(min_value=1, max_value=500),
    name=st.from_regex(r"[A-Z][A-Za-z0-9]{0,8}(\.[A-Z][a-z]{0,5})?(\$anon[1-9])?", fullmatch=True),
)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.one_of(st.just(ROOT_SITE), sites), sites), max_size=20))
def test_rendered_records_parse_back(pairs):
    edges = [RawEdge(caller=caller, callee=callee) for caller, callee in pairs]
    parsed = parse_log([e.render() for e in edges])
    assert [(e.caller, e.callee) for e in parsed.edges] == [(e.caller, e.callee) for e in edges]


def test_goshop_graph_shape():
    graph, _ = goshop_graph()
    labels = {graph.node_label(n) for n in graph.nodes}
    assert "Controller.AddProgram@program/controller.go:25" in labels
    assert graph_stats(graph) == (10, 8, 3)
    assert graph.roots == [NodeId(TEST_FILE, 8), NodeId(TEST_FILE, 25)]
    edge = graph.edges[(NodeId("program/controller.go", 25), NodeId("program/db.go", 17))]
    assert edge.kind == EdgeKind.ASYNC_INFERRED
    assert graph.children(NodeId("program/handler.go", 13)) == [NodeId("program/controller.go", 25)]


def test_async_inference_is_idempotent():
    graph, index = goshop_graph()
    before = graph.edge_set()
    infer_async_edges(graph, index)
    assert graph.edge_set() == before
    assert graph.ambiguities == []


def test_ambiguous_async_launch_is_recorded_once(tmp_path):
    source = (
        "package p\n\n"
        "type A struct{}\n\n"
        "func (A) Save() {}\n\n"
        "type B struct{}\n\n"
        "func (B) Save() { println() }\n\n"
        "func Run(a A) {\n\tgo a.Save()\n}\n"
    )
    (tmp_path / "p.go").write_text(source, encoding="utf-8")
    index = FunctionIndex(str(tmp_path), FakeAdapter())
    functions = {fn.name: fn for fn in parse_functions(source, "p.go")}
    log = [
        "MethodEntry: p.go, 11, Run Caller: -, 0, -",
        "MethodEntry: p.go, 5, A.Save Caller: -, 0, -",
        "MethodEntry: p.go, 9, B.Save Caller: -, 0, -",
    ]
    graph = build_graph(parse_log(log).edges, index, test_node=functions["Run"].node_id)
    infer_async_edges(graph, index)
    infer_async_edges(graph, index)
    assert len(graph.edges) == 0
    assert len(graph.ambiguities) == 1
    assert graph.ambiguities[0].site.callee_name == "Save"
    assert len(graph.ambiguities[0].matches) == 2


def test_unresolved_node():
    index = FunctionIndex(str(GOSHOP), FakeAdapter())
    with pytest.raises(UnresolvedNode):
        build_graph(parse_log(["MethodEntry: program/db.go, 2, Ghost Caller: -, 0, -"]).edges, index)


def test_stats_of_single_node_and_chain():
    assert graph_stats(graph_from_edges([], nodes=1)) == (1, 0, 0)
    assert graph_stats(graph_from_edges([(0, 1), (1, 2), (2, 3)])) == (4, 3, 3)


def test_stats_terminate_on_cycles():
    graph = graph_from_edges([(0, 1), (1, 2), (2, 0), (2, 3)])
    assert graph_stats(graph) == (4, 4, 3)


def test_stats_reuse_finished_subtrees():
    # F1 is finished through F0 before F2 reaches it again.
    graph = graph_from_edges([(0, 1), (0, 2), (2, 1), (1, 3)])
    assert graph_stats(graph) == (4, 4, 3)


def test_stats_of_a_very_deep_chain():
    size = 5000
    graph = graph_from_edges([(i, i + 1) for i in range(size - 1)] + [(size - 1, 0)])
    assert graph_stats(graph) == (size, size, size - 1)


def test_duplicate_edges_are_kept_once():
    graph = graph_from_edges([(0, 1), (0, 1)])
    assert len(graph.edges) == 1
    assert graph.children(node(0)) == [node(1)]


def test_to_dot():
    graph, _ = goshop_graph()
    dot = to_dot(graph)
    assert dot.startswith("digraph dcg {\n  node [shape=box];\n")
    assert '[label="ValidateIdentity@program/controller.go:33"]' in dot
    assert dot.count("[style=dashed]") == 1
    assert dot.endswith("}\n")


def test_trace_call_graph_end_to_end(goshop):
    adapter = TracingAdapter(GOSHOP_LOG)
    test = TestId(target="program", func="TestAddProgram", case="stored program")
    _, test_fn = adapter.locate_test_function(goshop, test)
    graph = trace_call_graph(adapter, goshop, test, Scope.CASE, test_fn, trace_runs=3, race=False, timeout=30)
    assert graph_stats(graph) == (10, 8, 3)
    assert len(adapter.run_calls) == 1
    shadow = adapter.run_calls[0][0]
    assert not Path(shadow).exists()


def test_trace_call_graph_without_failing_run(goshop):
    adapter = TracingAdapter([], run_script=always(Verdict.PASS))
    test = TestId(target="program", func="TestAddProgram", case="stored program")
    _, test_fn = adapter.locate_test_function(goshop, test)
    with pytest.raises(InstrumentationError):
        trace_call_graph(adapter, goshop, test, Scope.CASE, test_fn, trace_runs=2, race=False, timeout=30)


def test_trace_stops_at_the_deadline(goshop):
    clock = FakeClock()

    def slow_pass(workspace, test, scope, runs):
        clock.advance(40)
        return [(Verdict.PASS, "")] * runs

    adapter = TracingAdapter([], run_script=slow_pass)
    test = TestId(target="program", func="TestAddProgram", case="stored program")
    _, test_fn = adapter.locate_test_function(goshop, test)
    with pytest.raises(TimeLimitExceeded):
        trace_call_graph(
            adapter, goshop, test, Scope.CASE, test_fn, trace_runs=50, race=False, timeout=30,
            deadline=Deadline(100, clock),
        )
    assert len(adapter.run_calls) == 3
    assert not Path(adapter.run_calls[0][0]).exists()


def test_function_index_keeps_first_of_colliding_declarations(tmp_path):
    (tmp_path / "x.go").write_text("package x\n\nvar a, b = func() {}, func() {}\n", encoding="utf-8")
    index = FunctionIndex(str(tmp_path), FakeAdapter())
    fn = index.lookup(NodeId("x.go", 3))
    assert fn.name == "x$anon1"
    assert index.lookup(NodeId("missing.go", 1)) is None

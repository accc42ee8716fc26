"""
Runs against a real Go toolchain; skipped when `go` is not on PATH.
"""

import pytest

from app.adapters.go_adapter import GoAdapter
from app.config import load_config
from app.logic.call_graph import EdgeKind, graph_stats, trace_call_graph
from app.logic.fixing_loop import fix_flaky_test
from app.logic.reproduction import parse_ticket, reproduce, select_primary_failure
from app.models import FixStatus, Scope, TestId, Verdict
from app.utils.workspace_utils import tree_hash
from tests.support import ScriptedBackend
from tests.test_fixing_loop import KEYS, THOUGHT, fenced, simplified_keys

pytestmark = pytest.mark.go

# Orders the two keys without touching the imports.
ORDERING = (
    "got := Keys(tc.prices)\n"
    "\t\t\tif len(got) == 2 && got[0] > got[1] {\n"
    "\t\t\t\tgot[0], got[1] = got[1], got[0]\n"
    "\t\t\t}\n"
)


def test_map_order_reproduces_at_case_scope(goshop):
    report = reproduce(GoAdapter(), goshop, KEYS, runs=60, race=False, per_run_timeout=60)
    assert report.reproduced
    assert report.scope_used == Scope.CASE
    assert report.failures[0].assertion_file == "flaky/maporder_test.go"
    assert report.failures[0].assertion_line == 21


def test_polluted_env_needs_the_whole_target(goshop):
    region = TestId(target="flaky", func="TestRegion", case="default region")
    report = reproduce(GoAdapter(), goshop, region, runs=5, race=False, per_run_timeout=60)
    assert report.reproduced
    assert report.scope_used == Scope.TARGET
    assert report.failures[0].assertion_line == 29


@pytest.mark.parametrize("ticket, runs, race, scope, assertion", [
    ("flaky/TestKeys/two items", 60, False, Scope.CASE, ("flaky/maporder_test.go", 21)),
    ("flaky/TestFirstResponse/both answer", 300, True, Scope.CASE, ("flaky/schedule_test.go", 33)),
    ("flaky/TestNewOrder/first order", 1000, True, Scope.CASE, ("flaky/timestamp_test.go", 21)),
    ("flaky/TestExpiresSoon/just over a second", 1000, True, Scope.CASE, ("flaky/cutoff_test.go", 22)),
    ("flaky/TestRegion/default region", 5, False, Scope.TARGET, ("flaky/region_test.go", 29)),
])
def test_every_root_cause_fixture_reproduces(goshop, ticket, runs, race, scope, assertion):
    report = reproduce(GoAdapter(), goshop, parse_ticket(ticket), runs=runs, race=race, per_run_timeout=60)
    assert report.reproduced
    assert report.scope_used == scope
    primary = select_primary_failure(report.failures)
    assert (primary.assertion_file, primary.assertion_line) == assertion


def test_real_run_verdicts(goshop):
    adapter = GoAdapter()
    outcomes = adapter.run_test(goshop, KEYS, Scope.CASE, 3, race=False, timeout=60)
    assert len(outcomes) == 3
    assert {o.verdict for o in outcomes} <= {Verdict.PASS, Verdict.FAIL}
    assert adapter.compile(goshop) == []


def test_program_graph_has_the_async_write(goshop):
    adapter = GoAdapter()
    test = TestId(target="program", func="TestAddProgram", case="stored program")
    _, test_fn = adapter.locate_test_function(goshop, test)
    before = tree_hash(goshop)
    graph = trace_call_graph(adapter, goshop, test, Scope.CASE, test_fn, trace_runs=200, race=False, timeout=60)
    by_name = {fn.name: node for node, fn in graph.nodes.items()}
    assert {"TestAddProgram", "Controller.AddProgram", "ValidateIdentity", "MemoryDB.UpdateInfo"} <= set(by_name)

    async_edges = [e for e in graph.edges.values() if e.kind == EdgeKind.ASYNC_INFERRED]
    assert [(graph.nodes[e.caller].name, graph.nodes[e.callee].name) for e in async_edges] == [
        ("Controller.AddProgram", "MemoryDB.UpdateInfo"),
    ]
    assert by_name["Controller.AddProgram"] in graph.children(by_name["Handler.AddProgram"])
    assert by_name["MemoryDB.UpdateInfo"] in graph.children(by_name["Controller.AddProgram"])
    nodes, edges, depth = graph_stats(graph)
    assert nodes >= 5 and edges >= 4 and depth >= 3
    assert tree_hash(goshop) == before


def test_map_order_is_fixed_end_to_end(goshop):
    fix = fenced(simplified_keys().replace("got := Keys(tc.prices)\n", ORDERING))
    backend = ScriptedBackend({"thought": [THOUGHT], "fix": [fix]})
    settings = load_config(overrides={
        "pipeline": {"runs": 40, "M": 1, "P": 1, "N": 1, "trace_runs": 40, "race": False},
        "traversal": {"strategy": "bfs-all"},
    })
    before = tree_hash(goshop)

    outcome = fix_flaky_test(KEYS, settings, GoAdapter(settings.runner), backend, goshop)

    assert outcome.status == FixStatus.FIXED
    assert "+\t\t\tif len(got) == 2 && got[0] > got[1] {\n" in outcome.diff
    assert tree_hash(goshop) == before

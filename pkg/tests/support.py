"""
Test doubles: a Go adapter with a scripted toolchain, a scripted model
backend and a manual clock.
"""

from collections import defaultdict, deque
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from app.adapters.go_adapter import GoAdapter
from app.adapters.go_recorder import LOG_ENV_VAR
from app.errors import ReplayMiss
from app.llm.interface import LLMBackend, PromptBundle
from app.logic.call_graph import DynamicCallGraph
from app.models import CompileDiagnostic, FunctionKind, RunOutcome, Scope, SubjectFunction, TestId, Verdict

FIXTURES = Path(__file__).resolve().parent / "fixtures"
GOSHOP = FIXTURES / "goshop"
TABLES = FIXTURES / "tables"

# (verdict, raw output) per run
ScriptedRun = Tuple[Verdict, str]
RunScript = Callable[[str, TestId, Scope, int], List[ScriptedRun]]


class FakeAdapter(GoAdapter):
    """GoAdapter whose compile and run_test are scripted; parsing and layout stay real."""

    def __init__(
        self,
        run_script: Optional[RunScript] = None,
        compile_script: Optional[Callable[[str], List[CompileDiagnostic]]] = None,
    ):
        super().__init__()
        self.run_script = run_script or (lambda workspace, test, scope, runs: [(Verdict.PASS, "")] * runs)
        self.compile_script = compile_script or (lambda workspace: [])
        self.run_calls: List[Tuple[str, TestId, Scope, int, Optional[dict]]] = []
        self.compile_calls: List[str] = []

    def compile(self, workspace: str) -> List[CompileDiagnostic]:
        self.compile_calls.append(workspace)
        return self.compile_script(workspace)

    def run_test(self, workspace, selector, scope, runs, race, timeout, env=None) -> List[RunOutcome]:
        self.run_calls.append((workspace, selector, scope, runs, env))
        return [
            RunOutcome(test=selector, run_index=i, verdict=verdict, raw_output=output)
            for i, (verdict, output) in enumerate(self.run_script(workspace, selector, scope, runs))
        ]


def always(verdict: Verdict, output: str = "") -> RunScript:
    return lambda workspace, test, scope, runs: [(verdict, output)] * runs


def every_nth_fails(n: int, output: str, scope: Optional[Scope] = None) -> RunScript:
    """Every n-th run fails (only in `scope` when given); the rest pass."""
    def script(workspace, test, s, runs):
        if scope is not None and s != scope:
            return [(Verdict.PASS, "")] * runs
        return [(Verdict.FAIL, output) if (i + 1) % n == 0 else (Verdict.PASS, "") for i in range(runs)]
    return script


class ScriptedBackend(LLMBackend):
    """
    Serves canned responses per prompt purpose, in order. A purpose may
    also map to a callable that receives the prompt.
    """

    def __init__(self, responses: Optional[Dict[str, Iterable[Union[str, Callable[[PromptBundle], str]]]]] = None):
        self.queues: Dict[str, deque] = defaultdict(deque)
        for purpose, items in (responses or {}).items():
            self.queues[purpose].extend(items)
        self.prompts: List[PromptBundle] = []

    def add(self, purpose: str, *responses) -> "ScriptedBackend":
        self.queues[purpose].extend(responses)
        return self

    def purposes(self) -> List[str]:
        return [p.purpose.value for p in self.prompts]

    def complete(self, prompt: PromptBundle) -> str:
        self.prompts.append(prompt)
        queue = self.queues.get(prompt.purpose.value)
        if not queue:
            raise ReplayMiss(prompt.canonical_hash, prompt.purpose.value)
        item = queue.popleft()
        return item(prompt) if callable(item) else item


class FakeClock:
    def __init__(self, start: float = 0.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


def make_function(name: str, file: str = "pkg/a.go", line: int = 1, source: Optional[str] = None,
                  kind: FunctionKind = FunctionKind.NAMED) -> SubjectFunction:
    source = source if source is not None else f"func {name}() {{\n}}"
    return SubjectFunction(
        name=name, file=file, decl_line=line, body_span=(0, len(source)), block_span=None, source=source, kind=kind,
    )


def graph_from_edges(edges: Sequence[Tuple[int, int]], nodes: Optional[int] = None, test_node: Optional[int] = 0) -> DynamicCallGraph:
    """Graph over synthetic functions F0..Fn-1 declared on line i+1 of pkg/a.go."""
    count = nodes if nodes is not None else 1 + max((max(a, b) for a, b in edges), default=0)
    functions = [make_function(f"F{i}", line=i + 1) for i in range(count)]
    graph = DynamicCallGraph(test_node=functions[test_node].node_id if test_node is not None else None)
    for fn in functions:
        graph.add_node(fn)
    for a, b in edges:
        graph.add_edge(functions[a].node_id, functions[b].node_id)
    return graph


def node(i: int):
    return make_function(f"F{i}", line=i + 1).node_id


class TracingAdapter(FakeAdapter):
    """Writes a canned recorder log for every instrumented run."""

    def __init__(self, log_lines: Sequence[str], run_script: Optional[RunScript] = None):
        super().__init__(run_script=run_script or (lambda *a: [(Verdict.FAIL, "failed")]))
        self.log_lines = list(log_lines)

    def run_test(self, workspace, selector, scope, runs, race, timeout, env=None) -> List[RunOutcome]:
        if env and LOG_ENV_VAR in env:
            Path(env[LOG_ENV_VAR]).write_text("\n".join(self.log_lines) + "\n", encoding="utf-8")
        return super().run_test(workspace, selector, scope, runs, race, timeout, env)

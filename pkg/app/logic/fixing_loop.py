"""
The repair pipeline for one flaky test.

reproduce -> trace a failing run -> simplify the test, then three nested
loops: M contexts, P thoughts per context, N fixes per thought. Every
rejected fix is reverted on the private work copy with a hash check; an
accepted fix on the simplified test is transplanted into the original test
and validated again on a fresh copy before it is emitted as a diff.
"""

import logging
import time
from typing import Callable, List, Optional, Tuple

from app.adapters.interface import SubjectAdapter
from app.config import Settings
from app.errors import (
    CaseNotFound,
    HttpError,
    InstrumentationError,
    MalformedLine,
    MergeParseError,
    NeutralizationDiverged,
    ParseError,
    PatchParseFailure,
    ReplayMiss,
    TableNotFound,
    ThoughtParseFailure,
    TimeLimitExceeded,
    UnresolvedNode,
)
from app.llm.gateway import LLMGateway
from app.llm.interface import LLMBackend
from app.llm.parsers import parse_patch, parse_thought
from app.logic.call_graph import DynamicCallGraph, trace_call_graph
from app.logic.context_collection import LLMSelectionOracle, build_context, render_evidence
from app.logic.reproduction import Reproducer, select_primary_failure
from app.logic.simplification import SimplifiedTest, find_test_function, neutralize_unused, simplify_test, unsimplified
from app.logic.transplantation import fixed_case_name, restore_neutralized, transplant
from app.logic.validation import Validator, replace_function
from app.models import (
    AttemptRecord,
    ContextBundle,
    FixOutcome,
    FixStatus,
    ReproductionReport,
    Scope,
    SubjectFunction,
    TestId,
    Thought,
    ThoughtHistory,
    ValidationVerdict,
)
from app.utils.clock_utils import Deadline
from app.utils.diff_utils import unified_diff
from app.utils.prompt_utils import build_prompt
from app.utils.workspace_utils import Snapshot, copy_workspace, read_text, remove_workspace, write_text

logger = logging.getLogger(__name__)

THOUGHT_RETRIES = 2
NO_OP_DETAIL = "fix is a no-op: the test function is unchanged"


def generate_thought(
    gateway: LLMGateway,
    evidence: str,
    test_file: str,
    test_code: str,
    context: ContextBundle,
    history: ThoughtHistory,
) -> Thought:
    """
    Ask for a root-cause category, explanation and fixing plan.

    Raises:
        ThoughtParseFailure: no parseable answer after the retries.
    """
    prompt = build_prompt("THOUGHT", {
        "evidence": evidence,
        "test_file": test_file,
        "test_code": test_code,
        "context": context.rendered,
        "history": history.summary(),
    })
    last_error: Optional[ThoughtParseFailure] = None
    for attempt in range(1 + THOUGHT_RETRIES):
        try:
            return parse_thought(gateway.complete(prompt))
        except ThoughtParseFailure as e:
            last_error = e
            logger.warning(f"[FIX] thought response {attempt + 1} unusable: {e}")
    raise last_error


def generate_fix(
    gateway: LLMGateway,
    evidence: str,
    test_file: str,
    test_code: str,
    context: ContextBundle,
    thought: Thought,
    earlier_attempts: List[str],
    func: str,
    production_names: Optional[List[str]] = None,
) -> str:
    """
    Ask for a full replacement of the test function following the thought.

    Raises:
        PatchParseFailure: the reply has no single usable function.
        NonTestEdit: the reply touches production code.
    """
    prompt = build_prompt("FIX", {
        "evidence": evidence,
        "test_file": test_file,
        "test_code": test_code,
        "context": context.rendered,
        "category": thought.category.render(),
        "explanation": thought.explanation,
        "plan": thought.plan,
        "attempts": "\n".join(earlier_attempts),
        "func": func,
    })
    return parse_patch(gateway.complete(prompt), func, production_names)


class RepairPipeline:
    def __init__(
        self,
        settings: Settings,
        adapter: SubjectAdapter,
        backend: LLMBackend,
        workspace: str,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.settings = settings
        self.adapter = adapter
        self.backend = backend
        self.workspace = workspace
        self.clock = clock

    # Stages

    def reproduce(self, test: TestId, deadline: Deadline, gateway: Optional[LLMGateway]) -> ReproductionReport:
        cfg = self.settings.pipeline
        reproducer = Reproducer(self.adapter, self.workspace, cfg.race, cfg.per_run_timeout, gateway, deadline)
        return reproducer.reproduce(test, cfg.runs)

    def build_call_graph(
        self, test: TestId, scope: Scope, test_fn: SubjectFunction, notes: List[str], deadline: Optional[Deadline] = None,
    ) -> DynamicCallGraph:
        """Trace one failing instrumented run; falls back to the test function alone."""
        cfg = self.settings.pipeline
        try:
            return trace_call_graph(
                self.adapter, self.workspace, test, scope, test_fn, cfg.trace_budget, cfg.race, cfg.per_run_timeout,
                deadline=deadline,
            )
        except (InstrumentationError, ParseError, MalformedLine, UnresolvedNode) as e:
            note = f"call graph degraded to the test function: {e}"
            logger.warning(f"[DCG] {note}")
            notes.append(note)
            graph = DynamicCallGraph(test_node=test_fn.node_id)
            graph.add_node(test_fn)
            return graph

    def simplify(self, work: str, test: TestId, scope: Scope, test_fn: SubjectFunction, notes: List[str]) -> SimplifiedTest:
        """Write the simplified test into the work copy and make it build."""
        if not self.settings.pipeline.simplify:
            return unsimplified(test_fn, "simplification disabled")
        if scope != Scope.CASE:
            note = "simplification skipped: the failure needs the other tests of the target"
            notes.append(note)
            return unsimplified(test_fn, note)
        original = read_text(work, test_fn.file)
        try:
            simp = simplify_test(original, test_fn.file, test.func, test.case)
        except CaseNotFound as e:
            notes.append(f"simplification skipped: {e}")
            return unsimplified(test_fn, str(e))
        if not simp.simplified:
            if simp.note:
                notes.append(f"simplification skipped: {simp.note}")
            return simp
        write_text(work, test_fn.file, simp.apply_to_file(original, simp.t_simp))
        try:
            neutralize_unused(self.adapter, work, test_fn.file)
        except NeutralizationDiverged as e:
            write_text(work, test_fn.file, original)
            note = f"simplification reverted: {e}"
            logger.warning(f"[SIMPLIFY] {note}")
            notes.append(note)
            return unsimplified(test_fn, note)
        return simp

    def production_names(self, work: str, test: TestId) -> List[str]:
        package = self.adapter.package_dir(test.target)
        names = set()
        for rel in self.adapter.source_files(work, [package]):
            if self.adapter.is_test_file(rel):
                continue
            try:
                names.update(fn.short_name for fn in self.adapter.parse_functions(read_text(work, rel), rel))
            except ParseError:
                continue
        return sorted(names)

    def finalize(
        self,
        test: TestId,
        test_file: str,
        simp: SimplifiedTest,
        base_text: str,
        fixed_text: str,
        scope: Scope,
        deadline: Deadline,
    ) -> Tuple[Optional[str], str]:
        """
        Express an accepted fix against the pristine file and validate it on a
        fresh copy. Returns (diff, detail); diff is None when the fix does not hold.
        """
        cfg = self.settings.pipeline
        pristine = read_text(self.workspace, test_file)
        if simp.simplified:
            t_orig_fixed = transplant(base_text, fixed_text, simp.t_orig, simp.target_case)
        else:
            t_orig_fixed = fixed_text
        merged = replace_function(pristine, test_file, test.func, t_orig_fixed)
        case = fixed_case_name(fixed_text, test.case) if test.case is not None else None
        candidates = [restore_neutralized(merged)]
        with_check = restore_neutralized(merged, check_references=True)
        if with_check != candidates[0]:
            candidates.append(with_check)
        candidates = [c for c in candidates if c != pristine]
        if not candidates:
            return None, NO_OP_DETAIL

        detail = ""
        for final_text in candidates:
            fresh = copy_workspace(self.workspace, prefix="flaky-mender-final-")
            try:
                write_text(fresh, test_file, final_text)
                validator = Validator(
                    self.adapter, fresh, test, test_file, scope, cfg.runs, cfg.race, cfg.per_run_timeout,
                    repair_rounds=0, deadline=deadline, chunk_size=self.settings.runner.batch_size,
                )
                result = validator.validate_in_place(case)
            finally:
                remove_workspace(fresh)
            if result.verdict == ValidationVerdict.ACCEPTED:
                return unified_diff(test_file, pristine, final_text), result.summary()
            detail = f"transplanted fix {result.summary()}"
            # Only a build failure can be helped by dropping unreferenced restored lines.
            if result.verdict != ValidationVerdict.COMPILE_FAILED:
                break
        return None, detail

    # Driver

    def fix_flaky_test(self, test: TestId) -> FixOutcome:
        """
        Run the whole pipeline for one test. Failures map to statuses;
        toolchain and selector errors propagate to the caller.
        """
        deadline = Deadline(self.settings.pipeline.time_limit, self.clock)
        gateway = LLMGateway(self.backend, deadline)
        outcome = FixOutcome(status=FixStatus.EXHAUSTED, test=test)
        try:
            report = self.reproduce(test, deadline, gateway)
        except TimeLimitExceeded as e:
            outcome.status = FixStatus.TIMED_OUT
            outcome.notes.append(str(e))
            outcome.llm_calls = gateway.call_count
            return outcome
        outcome.reproduction = report
        if not report.reproduced:
            outcome.status = FixStatus.NOT_REPRODUCED
            outcome.llm_calls = gateway.call_count
            return outcome
        outcome.primary_failure = select_primary_failure(report.failures)

        work = copy_workspace(self.workspace)
        try:
            self._repair(test, report, outcome, work, deadline, gateway)
        except TimeLimitExceeded as e:
            outcome.status = FixStatus.TIMED_OUT
            outcome.notes.append(str(e))
        except (HttpError, ReplayMiss) as e:
            outcome.status = FixStatus.EXHAUSTED
            outcome.notes.append(f"model backend failed: {e}")
            logger.error(f"[FIX] model backend failed: {e}")
        finally:
            remove_workspace(work)
        outcome.llm_calls = gateway.call_count
        logger.info(f"[FIX] {test.render()}: {outcome.status.value} after {len(outcome.attempts_log)} attempt(s), {outcome.llm_calls} LLM call(s)")
        return outcome

    def _repair(
        self,
        test: TestId,
        report: ReproductionReport,
        outcome: FixOutcome,
        work: str,
        deadline: Deadline,
        gateway: LLMGateway,
    ) -> None:
        cfg = self.settings.pipeline
        scope = report.scope_used
        test_file, test_fn = self.adapter.locate_test_function(work, test)
        deadline.check("call graph tracing")
        graph = self.build_call_graph(test, scope, test_fn, outcome.notes, deadline)
        simp = self.simplify(work, test, scope, test_fn, outcome.notes)
        base_text = find_test_function(read_text(work, test_file), test_file, test.func).source
        production = self.production_names(work, test)
        evidence = render_evidence(test, outcome.primary_failure)
        validator = Validator(
            self.adapter, work, test, test_file, scope, cfg.runs, cfg.race, cfg.per_run_timeout,
            repair_rounds=cfg.repair_rounds, gateway=gateway, deadline=deadline,
            production_names=production, chunk_size=self.settings.runner.batch_size,
        )
        snapshot = Snapshot(work, [test_file])
        history = ThoughtHistory()

        for m in range(1, cfg.M + 1):
            oracle = LLMSelectionOracle(gateway, evidence, guidance=history.summary())
            context = build_context(graph, self.settings.traversal, oracle, test_fn)
            outcome.context_nodes = [graph.node_label(n) for n in context.final]
            outcome.notes.extend(f"context {m}: oracle fallback, {note}" for note in context.fallbacks)

            for p in range(1, cfg.P + 1):
                try:
                    thought = generate_thought(gateway, evidence, test_file, base_text, context, history)
                except ThoughtParseFailure as e:
                    outcome.attempts_log.append(AttemptRecord(m=m, p=p, n=0, outcome="thought-parse-failure", summary=str(e)))
                    continue

                summaries: List[str] = []
                for n in range(1, cfg.N + 1):
                    deadline.check(f"fix attempt ({m},{p},{n})")
                    record = AttemptRecord(m=m, p=p, n=n, category=thought.category.render(), outcome="")
                    try:
                        candidate = generate_fix(
                            gateway, evidence, test_file, base_text, context, thought, summaries, test.func, production,
                        )
                    except PatchParseFailure as e:
                        record.outcome = "patch-rejected"
                        record.summary = str(e)
                        self._revert(snapshot, record)
                        summaries.append(f"Attempt {n}: rejected, {e}")
                        outcome.attempts_log.append(record)
                        continue

                    if candidate.strip() == base_text.strip():
                        record.outcome = ValidationVerdict.TEST_FAILED.value
                        record.summary = NO_OP_DETAIL
                        self._revert(snapshot, record)
                        summaries.append(f"Attempt {n}: {NO_OP_DETAIL}")
                        outcome.attempts_log.append(record)
                        continue

                    try:
                        result = validator.validate(base_text, candidate)
                    except TimeLimitExceeded:
                        self._revert(snapshot, record)
                        outcome.attempts_log.append(record.model_copy(update={"outcome": "timed-out"}))
                        raise
                    record.outcome = result.verdict.value
                    record.summary = result.summary()

                    if result.verdict == ValidationVerdict.ACCEPTED:
                        try:
                            diff, detail = self.finalize(test, test_file, simp, base_text, result.final_text, scope, deadline)
                        except (TableNotFound, CaseNotFound, MergeParseError, ParseError) as e:
                            diff, detail = None, f"transplant failed: {e}"
                        if diff is not None:
                            self._revert(snapshot, record)
                            outcome.attempts_log.append(record)
                            outcome.status = FixStatus.FIXED
                            outcome.diff = diff
                            outcome.thought = thought
                            return
                        record.outcome = ValidationVerdict.TEST_FAILED.value if detail == NO_OP_DETAIL else "transplant-failed"
                        record.summary = detail

                    self._revert(snapshot, record)
                    summaries.append(f"Attempt {n}: {record.summary}")
                    outcome.attempts_log.append(record)
                history.append(thought, summaries)
        outcome.status = FixStatus.EXHAUSTED

    @staticmethod
    def _revert(snapshot: Snapshot, record: AttemptRecord) -> None:
        snapshot.restore()
        record.revert_hash = snapshot.digest


def fix_flaky_test(
    test: TestId,
    settings: Settings,
    adapter: SubjectAdapter,
    backend: LLMBackend,
    workspace: str,
    clock: Callable[[], float] = time.monotonic,
) -> FixOutcome:
    return RepairPipeline(settings, adapter, backend, workspace, clock).fix_flaky_test(test)


"""
Candidate validation: compile with LLM compile-repair rounds, then rerun the
test as many times as reproduction did.
"""

import logging
from typing import List, Optional, Sequence

from pydantic import BaseModel

from app.adapters.interface import SubjectAdapter
from app.errors import PatchParseFailure, SelectorNotFound, ToolchainCrashed
from app.llm.gateway import LLMGateway
from app.llm.parsers import parse_patch
from app.logic.simplification import find_test_function
from app.logic.transplantation import fixed_case_name
from app.models import CompileDiagnostic, Scope, TestId, ValidationResult, ValidationVerdict, Verdict
from app.utils.clock_utils import Deadline
from app.utils.prompt_utils import build_prompt
from app.utils.workspace_utils import read_text, write_text

logger = logging.getLogger(__name__)

MAX_RENDERED_DIAGNOSTICS = 30


def replace_function(file_text: str, path: str, func: str, func_text: str) -> str:
    fn = find_test_function(file_text, path, func)
    data = file_text.encode("utf-8")
    return (data[:fn.body_span[0]] + func_text.encode("utf-8") + data[fn.body_span[1]:]).decode("utf-8")


def render_diagnostics(diagnostics: Sequence[CompileDiagnostic]) -> str:
    lines = [d.render() for d in diagnostics[:MAX_RENDERED_DIAGNOSTICS]]
    if len(diagnostics) > MAX_RENDERED_DIAGNOSTICS:
        lines.append(f"... and {len(diagnostics) - MAX_RENDERED_DIAGNOSTICS} more")
    return "\n".join(lines)


def repair_compile(
    gateway: LLMGateway,
    original: str,
    modified: str,
    diagnostics: Sequence[CompileDiagnostic],
    func: str,
    production_names: Optional[Sequence[str]] = None,
) -> str:
    """
    One compile-repair round: the original function, the modified function
    and the compiler diagnostics go to the model; the reply is a new function.

    Raises:
        ValueError: called without diagnostics.
        PatchParseFailure: the reply holds no usable function.
    """
    if not diagnostics:
        raise ValueError("repair_compile needs at least one diagnostic")
    prompt = build_prompt("REPAIR", {
        "original": original,
        "modified": modified,
        "diagnostics": render_diagnostics(diagnostics),
        "func": func,
    })
    return parse_patch(gateway.complete(prompt), func, production_names)


class RerunTally(BaseModel):
    passed: int = 0
    total: int = 0
    timeouts: int = 0
    built: bool = True
    missing: str = ""


class Validator:
    def __init__(
        self,
        adapter: SubjectAdapter,
        workspace: str,
        test: TestId,
        test_file: str,
        scope: Scope,
        runs: int,
        race: bool = True,
        per_run_timeout: float = 300.0,
        repair_rounds: int = 2,
        gateway: Optional[LLMGateway] = None,
        deadline: Optional[Deadline] = None,
        production_names: Optional[List[str]] = None,
        chunk_size: int = 100,
    ):
        self.adapter = adapter
        self.workspace = workspace
        self.test = test
        self.test_file = test_file
        self.scope = scope
        self.runs = runs
        self.race = race
        self.per_run_timeout = per_run_timeout
        self.repair_rounds = repair_rounds
        self.gateway = gateway
        self.deadline = deadline
        self.production_names = production_names or []
        self.chunk_size = max(1, chunk_size)

    def _write_candidate(self, func_text: str) -> None:
        text = read_text(self.workspace, self.test_file)
        write_text(self.workspace, self.test_file, replace_function(text, self.test_file, self.test.func, func_text))

    def _compile(self) -> List[CompileDiagnostic]:
        try:
            return self.adapter.compile(self.workspace)
        except ToolchainCrashed as e:
            # Failed build without parseable diagnostics; hand the raw tail to the repair round.
            tail = e.output.strip().splitlines()[-5:] or [str(e)]
            return [CompileDiagnostic(file=self.test_file, line=1, message=" | ".join(tail))]

    def selector_for(self, func_text: str) -> TestId:
        """The test id to rerun once func_text is in place; follows a renamed case."""
        if self.test.case is None or not func_text:
            return self.test
        case = fixed_case_name(func_text, self.test.case)
        if case == self.test.case:
            return self.test
        logger.info(f"[VALIDATE] fix renamed case {self.test.case!r} to {case!r}")
        return self.test.model_copy(update={"case": case})

    def compile_with_repair(self, original: str, candidate: str) -> tuple:
        """Returns (diagnostics, rounds_used, final_text); empty diagnostics mean it builds."""
        self._write_candidate(candidate)
        diagnostics = self._compile()
        rounds = 0
        while diagnostics and rounds < self.repair_rounds and self.gateway is not None:
            rounds += 1
            logger.info(f"[VALIDATE] compile repair round {rounds}: {len(diagnostics)} diagnostic(s)")
            try:
                repaired = repair_compile(self.gateway, original, candidate, diagnostics, self.test.func, self.production_names)
            except PatchParseFailure as e:
                logger.warning(f"[VALIDATE] compile repair round {rounds} unusable: {e}")
                continue
            candidate = repaired
            self._write_candidate(candidate)
            diagnostics = self._compile()
        return diagnostics, rounds, candidate

    def rerun(self, selector: Optional[TestId] = None) -> RerunTally:
        """Reruns the selected test; stops at the first failing chunk."""
        selector = selector or self.test
        tally = RerunTally()
        while tally.total < self.runs:
            if self.deadline is not None:
                self.deadline.check("validation reruns")
            count = min(self.chunk_size, self.runs - tally.total)
            try:
                outcomes = self.adapter.run_test(self.workspace, selector, self.scope, count, self.race, self.per_run_timeout)
            except SelectorNotFound as e:
                tally.missing = str(e)
                return tally
            if outcomes and outcomes[0].verdict == Verdict.BUILD_ERROR:
                tally.built = False
                return tally
            tally.total += len(outcomes)
            tally.passed += sum(1 for o in outcomes if o.verdict == Verdict.PASS)
            tally.timeouts += sum(1 for o in outcomes if o.verdict == Verdict.TIMEOUT)
            if tally.passed < tally.total or not outcomes:
                break
        return tally

    def validate(self, original: str, candidate: str) -> ValidationResult:
        """
        Apply the candidate test function, make it build, rerun it.

        Accepted only when the build succeeds and every one of the configured
        reruns passes. The caller restores the workspace afterwards.
        """
        diagnostics, rounds, final_text = self.compile_with_repair(original, candidate)
        return self._finish(diagnostics, rounds, final_text, self.selector_for(final_text))

    def validate_in_place(self, case: Optional[str] = None) -> ValidationResult:
        """Build and rerun the workspace as it is, without compile repair."""
        selector = self.test if case is None else self.test.model_copy(update={"case": case})
        return self._finish(self._compile(), 0, "", selector)

    def _finish(
        self,
        diagnostics: List[CompileDiagnostic],
        rounds: int,
        final_text: str,
        selector: Optional[TestId] = None,
    ) -> ValidationResult:
        if diagnostics:
            return ValidationResult(
                built=False,
                repair_rounds_used=rounds,
                verdict=ValidationVerdict.COMPILE_FAILED,
                detail=diagnostics[0].render(),
                final_text=final_text,
            )
        tally = self.rerun(selector)
        if not tally.built:
            return ValidationResult(
                built=False, repair_rounds_used=rounds, verdict=ValidationVerdict.COMPILE_FAILED,
                detail="test binary failed to build", final_text=final_text,
            )
        if tally.missing:
            logger.warning(f"[VALIDATE] {tally.missing}")
            return ValidationResult(
                built=True, repair_rounds_used=rounds, verdict=ValidationVerdict.TEST_FAILED,
                detail=f"test did not run: {tally.missing}", final_text=final_text,
            )
        if tally.passed == tally.total == self.runs:
            verdict = ValidationVerdict.ACCEPTED
        elif tally.timeouts and tally.timeouts == tally.total - tally.passed:
            verdict = ValidationVerdict.TIMEOUT
        else:
            verdict = ValidationVerdict.TEST_FAILED
        result = ValidationResult(
            built=True,
            repair_rounds_used=rounds,
            reruns_passed=tally.passed,
            reruns_total=tally.total,
            verdict=verdict,
            final_text=final_text,
        )
        logger.info(f"[VALIDATE] {(selector or self.test).render()}: {result.summary()}")
        return result

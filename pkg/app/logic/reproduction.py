"""
Ticket parsing and failure reproduction.
"""

import logging
from collections import Counter
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

from app.adapters.interface import SubjectAdapter
from app.errors import ExtractionFailed, MalformedTicket, ToolchainCrashed
from app.models import FailureRecord, ReproductionReport, RunOutcome, Scope, TestId, Verdict
from app.utils.clock_utils import Deadline
from app.utils.failure_extraction import extract_failure_info

if TYPE_CHECKING:
    from app.llm.gateway import LLMGateway

logger = logging.getLogger(__name__)

FAILING_VERDICTS = (Verdict.FAIL, Verdict.TIMEOUT)


def parse_ticket(raw: str) -> TestId:
    """
    Split 'target/func/case' from the right; targets may contain '/'.

    Raises:
        MalformedTicket: fewer than three segments, or an empty target or func.
    """
    raw = raw.strip()
    if not raw:
        raise MalformedTicket("empty ticket")
    parts = raw.rsplit("/", 2)
    if len(parts) < 3:
        raise MalformedTicket(f"ticket {raw!r} is not of the form target/func/case")
    target, func, case = parts
    if not target or not func:
        raise MalformedTicket(f"ticket {raw!r} has an empty target or test function")
    return TestId(target=target, func=func, case=case)


def select_primary_failure(failures: List[FailureRecord]) -> Optional[FailureRecord]:
    """Most frequent (message, assertion_line); ties go to the earliest occurrence."""
    if not failures:
        return None
    counts = Counter(f.key for f in failures)
    best = max(counts.values())
    return next(f for f in failures if counts[f.key] == best)


class Reproducer:
    def __init__(
        self,
        adapter: SubjectAdapter,
        workspace: str,
        race: bool = True,
        per_run_timeout: float = 300.0,
        fallback: Optional["LLMGateway"] = None,
        deadline: Optional[Deadline] = None,
    ):
        self.adapter = adapter
        self.workspace = workspace
        self.race = race
        self.per_run_timeout = per_run_timeout
        self.fallback = fallback
        self.deadline = deadline

    def _run(self, test: TestId, scope: Scope, runs: int) -> List[RunOutcome]:
        if self.deadline is not None:
            self.deadline.check(f"{scope.value}-scope reproduction")
        outcomes = self.adapter.run_test(self.workspace, test, scope, runs, self.race, self.per_run_timeout)
        if outcomes and outcomes[0].verdict == Verdict.BUILD_ERROR:
            raise ToolchainCrashed(f"workspace does not build for {test.render()}", outcomes[0].raw_output)
        return outcomes

    def _extract(self, test: TestId, outcomes: List[RunOutcome], test_file: str) -> Tuple[List[FailureRecord], int]:
        records: List[FailureRecord] = []
        cache: Dict[str, Optional[FailureRecord]] = {}
        unextracted = 0
        package = self.adapter.package_dir(test.target)
        for outcome in outcomes:
            if outcome.verdict not in FAILING_VERDICTS:
                continue
            if outcome.raw_output not in cache:
                try:
                    cache[outcome.raw_output] = extract_failure_info(
                        outcome.raw_output, self.workspace, package, test_file, self.fallback,
                    )
                except ExtractionFailed as e:
                    logger.warning(f"[REPRO] run {outcome.run_index}: {e}")
                    cache[outcome.raw_output] = None
            record = cache[outcome.raw_output]
            if record is None:
                unextracted += 1
            else:
                records.append(record)
        return records, unextracted

    def reproduce(self, test: TestId, runs: int) -> ReproductionReport:
        """
        Rerun the test at case scope, then at target scope if the case never failed.

        Timeouts count as failures. The report is reproduced iff at least one
        failing run yielded a valid FailureRecord.
        """
        test_file, _ = self.adapter.locate_test_function(self.workspace, test)

        scope = Scope.CASE
        outcomes = self._run(test, scope, runs)
        observed = sum(1 for o in outcomes if o.verdict in FAILING_VERDICTS)
        logger.info(f"[REPRO] {test.render()} case scope: {observed}/{len(outcomes)} failing runs")
        if observed == 0:
            scope = Scope.TARGET
            outcomes = self._run(test, scope, runs)
            observed = sum(1 for o in outcomes if o.verdict in FAILING_VERDICTS)
            logger.info(f"[REPRO] {test.render()} target scope: {observed}/{len(outcomes)} failing runs")

        failures, unextracted = self._extract(test, outcomes, test_file)
        report = ReproductionReport(
            test=test,
            attempted_runs=runs,
            failures=failures,
            scope_used=scope,
            reproduced=bool(failures),
            observed_failures=observed,
            unextracted_failures=unextracted,
        )
        if not report.reproduced:
            logger.info(f"[REPRO] {test.render()} not reproduced after {runs} runs per scope")
        return report


def reproduce(
    adapter: SubjectAdapter,
    workspace: str,
    test: TestId,
    runs: int = 1000,
    race: bool = True,
    per_run_timeout: float = 300.0,
    fallback: Optional["LLMGateway"] = None,
    deadline: Optional[Deadline] = None,
) -> ReproductionReport:
    return Reproducer(adapter, workspace, race, per_run_timeout, fallback, deadline).reproduce(test, runs)

import logging

from app.commands import CommandContext, ExitCode
from app.commands.reproduce import REPRODUCTION_FILE, serialize_reproduction
from app.logic.fixing_loop import RepairPipeline
from app.logic.report import render_attempts, render_report
from app.models import FixOutcome, FixStatus, TestId

logger = logging.getLogger(__name__)

STATUS_EXIT_CODES = {
    FixStatus.FIXED: ExitCode.OK,
    FixStatus.NOT_REPRODUCED: ExitCode.NOT_REPRODUCED,
    FixStatus.EXHAUSTED: ExitCode.EXHAUSTED,
    FixStatus.TIMED_OUT: ExitCode.EXHAUSTED,
}


def write_outcome(ctx: CommandContext, outcome: FixOutcome) -> None:
    test = outcome.test
    if outcome.reproduction is not None:
        ctx.write_artifact(test, REPRODUCTION_FILE, serialize_reproduction(outcome.reproduction))
    if outcome.diff:
        ctx.write_artifact(test, "fix.diff", outcome.diff)
    else:
        ctx.discard_artifact(test, "fix.diff")
    ctx.write_artifact(test, "report.md", render_report(outcome))
    ctx.write_artifact(test, "attempts.jsonl", render_attempts(outcome))


def cmd_fix(ctx: CommandContext, test: TestId) -> ExitCode:
    pipeline = RepairPipeline(ctx.settings, ctx.adapter, ctx.backend, ctx.workspace, ctx.clock)
    outcome = pipeline.fix_flaky_test(test)
    write_outcome(ctx, outcome)
    logger.info(f"[CLI] {test.render()}: {outcome.status.value}")
    return STATUS_EXIT_CODES[outcome.status]

import json
import logging
from typing import Optional

from app.commands import CommandContext, ExitCode
from app.errors import TimeLimitExceeded
from app.llm.gateway import LLMGateway
from app.logic.reproduction import reproduce, select_primary_failure
from app.models import ReproductionReport, TestId
from app.utils.clock_utils import Deadline

logger = logging.getLogger(__name__)

REPRODUCTION_FILE = "reproduction.json"


def serialize_reproduction(report: ReproductionReport) -> str:
    primary = select_primary_failure(report.failures)
    document = {
        "report": report.model_dump(mode="json"),
        "primary_failure": primary.model_dump(mode="json") if primary else None,
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def reproduce_ticket(ctx: CommandContext, test: TestId, deadline: Optional[Deadline] = None) -> ReproductionReport:
    """Rerun the ticket's test and store the report; the LLM is consulted only for unreadable failures."""
    cfg = ctx.settings.pipeline
    deadline = deadline or Deadline(cfg.time_limit, ctx.clock)
    gateway = LLMGateway(ctx.backend, deadline)
    report = reproduce(ctx.adapter, ctx.workspace, test, cfg.runs, cfg.race, cfg.per_run_timeout, gateway, deadline)
    ctx.write_artifact(test, REPRODUCTION_FILE, serialize_reproduction(report))
    return report


def cmd_reproduce(ctx: CommandContext, test: TestId) -> ExitCode:
    try:
        report = reproduce_ticket(ctx, test)
    except TimeLimitExceeded as e:
        logger.error(f"[CLI] {test.render()}: {e}")
        return ExitCode.EXHAUSTED
    if not report.reproduced:
        return ExitCode.NOT_REPRODUCED
    logger.info(f"[CLI] {test.render()}: reproduced with {len(report.failures)} failure record(s)")
    return ExitCode.OK

"""
flaky-mender command line.

    python -m app.main fix 'example.com/goshop/flaky/TestSchedule/' --workspace ./goshop --runs 200

Tickets have the form target/func/case. One ticket may be given as an
argument; otherwise tickets are read one per line from --ticket-file or
standard input and processed in order. The exit code is the highest
per-ticket code.
"""

import argparse
import logging
import os
import sys
from typing import Any, Callable, Dict, Iterable, List, Optional

from dotenv import load_dotenv

from app.adapters.go_adapter import GoAdapter
from app.commands import CommandContext, ExitCode
from app.commands.fix import cmd_fix
from app.commands.graph import cmd_graph
from app.commands.reproduce import cmd_reproduce
from app.config import Settings, load_config, require_api_key
from app.errors import (
    ConfigError,
    InstrumentationError,
    MalformedTicket,
    ParseError,
    SelectorNotFound,
    ToolchainCrashed,
    ToolchainMissing,
)
from app.llm.gateway import create_backend
from app.logic.reproduction import parse_ticket
from app.models import TestId

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, Callable[[CommandContext, TestId], ExitCode]] = {
    "reproduce": cmd_reproduce,
    "graph": cmd_graph,
    "fix": cmd_fix,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flaky-mender", description="Reproduce, trace and repair flaky Go tests.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("reproduce", "rerun the test and record its failures"),
        ("graph", "reproduce, then export the call graph of one failing run"),
        ("fix", "run the whole repair pipeline"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("ticket", nargs="?", help="target/func/case")
        p.add_argument("--ticket-file", help="file with one ticket per line")
        p.add_argument("--workspace", default=".", help="root of the subject module")
        p.add_argument("--out", default="out", help="artifact directory")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--runs", type=int)
        p.add_argument("--trace-runs", type=int, help="instrumented runs tried for a failing trace; defaults to --runs")
        p.add_argument("--time-limit", type=float, help="seconds per ticket, reproduction included")
        p.add_argument("--m", type=int, help="context attempts")
        p.add_argument("--p", type=int, help="thoughts per context")
        p.add_argument("--n", type=int, help="fixes per thought")
        p.add_argument("--k", type=int, help="children selected per node")
        p.add_argument("--f", type=int, help="functions kept by the global filter")
        p.add_argument("--depth", type=int, help="traversal depth limit")
        p.add_argument("--strategy", choices=["guided", "bfs-all"])
        p.add_argument("--backend", choices=["replay", "http"])
        p.add_argument("--transcript", help="LLM transcript for replay or record mode")
        p.add_argument("--record", action="store_true", default=None, help="append live responses to the transcript")
        p.add_argument("--race", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--no-simplify", dest="simplify", action="store_false", default=None)
        p.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested overrides from flags; unset flags stay None and are ignored."""
    return {
        "pipeline": {
            "runs": args.runs,
            "trace_runs": args.trace_runs,
            "time_limit": args.time_limit,
            "M": args.m,
            "P": args.p,
            "N": args.n,
            "race": args.race,
            "simplify": args.simplify,
        },
        "traversal": {
            "k": args.k,
            "F": args.f,
            "d": args.depth,
            "strategy": args.strategy,
        },
        "backend": {
            "kind": args.backend,
            "transcript": args.transcript,
            "record": args.record,
        },
    }


def read_tickets(args: argparse.Namespace, stdin: Iterable[str]) -> List[str]:
    if args.ticket:
        return [args.ticket]
    if args.ticket_file:
        try:
            with open(args.ticket_file, "r", encoding="utf-8") as f:
                lines = f.readlines()
        except OSError as e:
            raise ConfigError("ticket-file", str(e))
    else:
        lines = list(stdin)
    return [line.strip() for line in lines if line.strip() and not line.lstrip().startswith("#")]


def run_ticket(command: str, ctx: CommandContext, raw: str) -> ExitCode:
    try:
        test = parse_ticket(raw)
        logger.info(f"[CLI] {command} {test.render()}")
        return COMMANDS[command](ctx, test)
    except (MalformedTicket, SelectorNotFound, ToolchainMissing, ToolchainCrashed, ParseError) as e:
        logger.error(f"[CLI] {raw}: {e}")
        return ExitCode.CONFIG_ERROR
    except InstrumentationError as e:
        logger.error(f"[CLI] {raw}: {e}")
        return ExitCode.INSTRUMENTATION_FAILED


def configure_logging(level: Optional[str]) -> None:
    level = (level or os.getenv("LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s %(message)s")


def main(argv: Optional[List[str]] = None, stdin: Iterable[str] = sys.stdin) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        settings: Settings = load_config(args.config, config_overrides(args))
        api_key = require_api_key(settings.backend)
        tickets = read_tickets(args, stdin)
        backend = create_backend(settings.backend, api_key)
    except ConfigError as e:
        logger.error(f"[CLI] {e}")
        return int(ExitCode.CONFIG_ERROR)
    if not tickets:
        logger.error("[CLI] no tickets given")
        return int(ExitCode.CONFIG_ERROR)

    ctx = CommandContext(settings, GoAdapter(settings.runner), backend, os.path.abspath(args.workspace), args.out)
    worst = ExitCode.OK
    for raw in tickets:
        worst = max(worst, run_ticket(args.command, ctx, raw))
    return int(worst)


if __name__ == "__main__":
    sys.exit(main())

"""
Subcommand implementations shared by the CLI.

Each command processes one ticket, writes its artifacts under
<out>/<ticket slug>/ and returns an exit code.
"""

import logging
import os
import time
from enum import IntEnum
from typing import Callable

from app.adapters.interface import SubjectAdapter
from app.config import Settings
from app.llm.interface import LLMBackend
from app.models import TestId

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    NOT_REPRODUCED = 2
    EXHAUSTED = 3
    CONFIG_ERROR = 4
    INSTRUMENTATION_FAILED = 5


class CommandContext:
    """Everything a subcommand needs besides the ticket."""

    def __init__(
        self,
        settings: Settings,
        adapter: SubjectAdapter,
        backend: LLMBackend,
        workspace: str,
        out_dir: str,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.settings = settings
        self.adapter = adapter
        self.backend = backend
        self.workspace = workspace
        self.out_dir = out_dir
        self.clock = clock

    def ticket_dir(self, test: TestId) -> str:
        path = os.path.join(self.out_dir, test.slug())
        os.makedirs(path, exist_ok=True)
        return path

    def write_artifact(self, test: TestId, name: str, text: str) -> str:
        path = os.path.join(self.ticket_dir(test), name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"[CLI] wrote {path}")
        return path

    def discard_artifact(self, test: TestId, name: str) -> None:
        """Drop an artifact left over from an earlier run of the same ticket."""
        path = os.path.join(self.out_dir, test.slug(), name)
        if os.path.exists(path):
            os.remove(path)

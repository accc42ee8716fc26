import logging
import time
from typing import TYPE_CHECKING, List, Optional, Tuple

from app.errors import ConfigError
from app.llm.interface import LLMBackend, PromptBundle
from app.utils.clock_utils import Deadline

if TYPE_CHECKING:
    from app.config import BackendConfig

logger = logging.getLogger(__name__)


class LLMGateway:
    """
    Single entry point for completions within one ticket.

    Checks the deadline before every call and logs each call's prompt hash,
    purpose and latency.
    """

    def __init__(self, backend: LLMBackend, deadline: Optional[Deadline] = None):
        self.backend = backend
        self.deadline = deadline
        self.calls: List[Tuple[str, str]] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, prompt: PromptBundle) -> str:
        if self.deadline is not None:
            self.deadline.check(f"{prompt.purpose.value} LLM call")
        started = time.monotonic()
        response = self.backend.complete(prompt)
        latency_ms = (time.monotonic() - started) * 1000
        self.calls.append((prompt.canonical_hash, prompt.purpose.value))
        logger.info(f"[LLM] purpose={prompt.purpose.value} hash={prompt.canonical_hash[:16]} latency={latency_ms:.0f}ms")
        return response


def create_backend(cfg: "BackendConfig", api_key: str = "") -> LLMBackend:
    """Backend for the configured kind: replay, live http, or live http recorded to the transcript."""
    from app.llm.openai_chat import OpenAIChatBackend
    from app.llm.replay import RecordingBackend, ReplayBackend

    if cfg.kind == "replay":
        try:
            return ReplayBackend(path=cfg.transcript)
        except (OSError, ValueError) as e:
            raise ConfigError("backend.transcript", str(e))
    backend: LLMBackend = OpenAIChatBackend(
        api_key=api_key or None,
        model=cfg.model,
        base_url=cfg.base_url,
        timeout=cfg.request_timeout,
        selection_temperature=cfg.selection_temperature,
        creative_temperature=cfg.creative_temperature,
    )
    if cfg.record:
        backend = RecordingBackend(backend, cfg.transcript)
    return backend

import logging
import os
import time
from typing import Callable, Optional

from openai import OpenAI, OpenAIError

from app.errors import HttpError
from app.llm.interface import LLMBackend, PromptBundle, PromptPurpose

logger = logging.getLogger(__name__)

DETERMINISTIC_PURPOSES = {PromptPurpose.SELECT, PromptPurpose.FILTER, PromptPurpose.EXTRACT}


class OpenAIChatBackend(LLMBackend):
    def __init__(
        self,
        api_key: str = None,
        model: str = "gpt-4o",
        base_url: Optional[str] = None,
        timeout: float = 120.0,
        selection_temperature: float = 0.0,
        creative_temperature: Optional[float] = None,
        retries: int = 3,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        """
        Chat-completion backend for any OpenAI-compatible endpoint.

        Args:
            api_key: API key (optional, will use OPENAI_API_KEY env var if not provided)
            base_url: endpoint override (optional, will use OPENAI_BASE_URL env var if set)
            selection_temperature: temperature for select, filter and extract prompts
            creative_temperature: temperature for thought, fix and repair prompts; None keeps the provider default
            retries: retries after the first failed request, with exponential backoff
        """
        self.api_key = api_key or os.getenv("OPENAI_API_KEY")
        if not self.api_key:
            raise ValueError("OpenAI API key is required. Set OPENAI_API_KEY environment variable or pass api_key parameter.")

        self.client = OpenAI(
            api_key=self.api_key,
            base_url=base_url or os.getenv("OPENAI_BASE_URL") or None,
            timeout=timeout,
            max_retries=0,
        )
        self.model = model
        self.selection_temperature = selection_temperature
        self.creative_temperature = creative_temperature
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep

    def _temperature(self, purpose: PromptPurpose) -> Optional[float]:
        if purpose in DETERMINISTIC_PURPOSES:
            return self.selection_temperature
        return self.creative_temperature

    def complete(self, prompt: PromptBundle) -> str:
        kwargs = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        }
        temperature = self._temperature(prompt.purpose)
        if temperature is not None:
            kwargs["temperature"] = temperature

        last_error = None
        for attempt in range(self.retries + 1):
            try:
                response = self.client.chat.completions.create(**kwargs)
                content = response.choices[0].message.content if response.choices else None
                if content:
                    return content.strip()
                last_error = "empty completion"
            except OpenAIError as e:
                last_error = str(e)
            if attempt < self.retries:
                delay = self.backoff * (2 ** attempt)
                logger.warning(f"[LLM] request failed ({last_error}); retrying in {delay:.1f}s")
                self.sleep(delay)
        raise HttpError(f"chat completion failed after {self.retries + 1} attempts: {last_error}")

"""
Transcript-backed backends.

A transcript is a line-delimited JSON file of {hash, purpose, response}
records. Replay serves the recorded responses of each prompt hash in order;
record mode forwards to a live backend and appends every response.
"""

import json
import logging
import os
from collections import defaultdict, deque
from typing import Deque, Dict, Iterable, Optional

from pydantic import BaseModel

from app.errors import ReplayMiss
from app.llm.interface import LLMBackend, PromptBundle

logger = logging.getLogger(__name__)


class TranscriptEntry(BaseModel):
    hash: str
    purpose: str
    response: str


def read_transcript(path: str) -> list:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(TranscriptEntry.model_validate_json(line))
            except ValueError as e:
                raise ValueError(f"{path}:{number}: invalid transcript record ({e})")
    return entries


class ReplayBackend(LLMBackend):
    def __init__(self, path: Optional[str] = None, entries: Optional[Iterable[TranscriptEntry]] = None):
        self.responses: Dict[str, Deque[str]] = defaultdict(deque)
        for entry in (read_transcript(path) if path else []):
            self.responses[entry.hash].append(entry.response)
        for entry in entries or []:
            self.responses[entry.hash].append(entry.response)
        logger.info(f"[LLM] replay transcript with {sum(len(q) for q in self.responses.values())} responses")

    def complete(self, prompt: PromptBundle) -> str:
        queue = self.responses.get(prompt.canonical_hash)
        if not queue:
            raise ReplayMiss(prompt.canonical_hash, prompt.purpose.value)
        return queue.popleft()


class RecordingBackend(LLMBackend):
    def __init__(self, inner: LLMBackend, path: str):
        self.inner = inner
        self.path = path
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)

    def complete(self, prompt: PromptBundle) -> str:
        response = self.inner.complete(prompt)
        entry = TranscriptEntry(hash=prompt.canonical_hash, purpose=prompt.purpose.value, response=response)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry.model_dump(), ensure_ascii=False) + "\n")
        return response

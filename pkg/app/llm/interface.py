import hashlib
from abc import ABC, abstractmethod
from enum import Enum

from pydantic import BaseModel, ConfigDict


class PromptPurpose(str, Enum):
    SELECT = "select"
    FILTER = "filter"
    THOUGHT = "thought"
    FIX = "fix"
    REPAIR = "repair"
    EXTRACT = "extract"


def canonicalize(text: str) -> str:
    """LF line endings, no trailing whitespace on any line, no trailing blank lines."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n")).rstrip("\n")


class PromptBundle(BaseModel):
    model_config = ConfigDict(frozen=True)

    system: str
    user: str
    purpose: PromptPurpose

    @property
    def canonical_hash(self) -> str:
        payload = canonicalize(self.system) + "\n\x1e\n" + canonicalize(self.user)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class LLMBackend(ABC):
    @abstractmethod
    def complete(self, prompt: PromptBundle) -> str:
        pass

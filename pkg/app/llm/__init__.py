from .interface import LLMBackend, PromptBundle, PromptPurpose
from .gateway import LLMGateway, create_backend
from .replay import RecordingBackend, ReplayBackend

__all__ = [
    "LLMBackend",
    "PromptBundle",
    "PromptPurpose",
    "LLMGateway",
    "create_backend",
    "RecordingBackend",
    "ReplayBackend",
]

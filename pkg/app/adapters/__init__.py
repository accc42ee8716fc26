from .interface import SubjectAdapter
from .go_adapter import GoAdapter

__all__ = ["SubjectAdapter", "GoAdapter"]

import time
from typing import Callable, Optional

from app.errors import TimeLimitExceeded


class Deadline:
    """Wall-clock budget measured with an injectable monotonic clock."""

    def __init__(self, limit: Optional[float], clock: Callable[[], float] = time.monotonic):
        self.limit = limit
        self.clock = clock
        self.started = clock()

    def elapsed(self) -> float:
        return self.clock() - self.started

    def remaining(self) -> float:
        if self.limit is None:
            return float("inf")
        return self.limit - self.elapsed()

    def expired(self) -> bool:
        return self.remaining() <= 0

    def check(self, before: str) -> None:
        if self.expired():
            raise TimeLimitExceeded(f"time limit of {self.limit}s reached before {before}")

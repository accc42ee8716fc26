"""
Byte-offset edit tracking.

Edits are recorded against the original file bytes and applied in reverse
start order so earlier offsets stay valid while later regions change.
"""

from enum import Enum
from typing import Iterable, List, Union

from pydantic import BaseModel, ConfigDict, model_validator

from app.errors import OverlappingEdits, SpanOutOfRange


class EditTag(str, Enum):
    REMOVAL = "removal"
    NEUTRALIZE = "neutralize"
    OTHER = "other"


class Edit(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: int
    end: int
    replacement: str = ""
    tag: EditTag = EditTag.OTHER

    @model_validator(mode="after")
    def _ordered(self):
        if self.start < 0 or self.start > self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")
        return self

    @property
    def span(self) -> tuple:
        return (self.start, self.end)


def check_edits(edits: List[Edit], length: int) -> List[int]:
    """
    Validate edits against a source of the given byte length.

    Returns the edit indices sorted by (start, insertion-first, input index).

    Raises:
        SpanOutOfRange: an edit ends past the source.
        OverlappingEdits: two edits share a byte, or two insertions hit the same offset.
    """
    for edit in edits:
        if edit.end > length:
            raise SpanOutOfRange(f"edit [{edit.start}, {edit.end}) exceeds source length {length}")

    order = sorted(range(len(edits)), key=lambda i: (edits[i].start, edits[i].end > edits[i].start, i))
    for previous, current in zip(order, order[1:]):
        a, b = edits[previous], edits[current]
        if b.start < a.end:
            raise OverlappingEdits(f"edits [{a.start}, {a.end}) and [{b.start}, {b.end}) overlap")
        if a.start == a.end == b.start == b.end:
            raise OverlappingEdits(f"two insertions at offset {a.start}")
    return order


def apply_edits(source: Union[str, bytes], edits: Iterable[Edit]) -> Union[str, bytes]:
    """
    Apply non-overlapping edits whose spans refer to the original byte offsets.

    Text input is encoded as UTF-8 for offset arithmetic and decoded back.
    """
    as_text = isinstance(source, str)
    data = source.encode("utf-8") if as_text else source
    edits = list(edits)
    order = check_edits(edits, len(data))

    # Reverse order keeps earlier offsets valid.
    for index in reversed(order):
        edit = edits[index]
        data = data[:edit.start] + edit.replacement.encode("utf-8") + data[edit.end:]
    return data.decode("utf-8") if as_text else data


def shift_edits(edits: Iterable[Edit], delta: int) -> List[Edit]:
    return [e.model_copy(update={"start": e.start + delta, "end": e.end + delta}) for e in edits]

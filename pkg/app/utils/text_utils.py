"""
Text utility functions for cleaning and processing model responses.
"""

import re
from typing import List, Tuple

FENCE_RE = re.compile(r"^[ \t]*```[ \t]*([\w+-]*)[ \t]*\n(.*?)^[ \t]*```[ \t]*$", re.DOTALL | re.MULTILINE)


def extract_fenced_blocks(text: str) -> List[Tuple[str, str]]:
    """Return (language, body) for every ``` fenced block, in order."""
    return [(m.group(1).lower(), m.group(2)) for m in FENCE_RE.finditer(text.replace("\r\n", "\n"))]


def strip_code_fence(text: str) -> str:
    """
    Remove markdown code block wrapping from a response.
    Handles cases where the model wraps the whole answer in ```json or ``` blocks.
    """
    text = text.strip()

    # Remove ``` at the beginning (any language)
    if text.startswith("```"):
        first_newline = text.find("\n", 3)
        if first_newline != -1:
            text = text[first_newline + 1:]
        else:
            text = text[3:]

    # Remove ``` at the end
    if text.endswith("```"):
        text = text[:-3]

    return text.strip()


def head_lines(text: str, count: int) -> str:
    return "\n".join(text.splitlines()[:count])


def collapse_whitespace(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()

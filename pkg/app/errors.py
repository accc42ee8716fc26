"""
Exception hierarchy for the repair pipeline.

Every failure the pipeline can report has its own class so the CLI can map it
to an exit code and the fixing loop can map it to an attempt verdict.
"""

from typing import Optional


class FlakyRepairError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(FlakyRepairError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"invalid configuration for '{key}': {message}")


# Subject toolchain

class ParseError(FlakyRepairError):
    def __init__(self, path: str, line: int, column: int, detail: str = "syntax error"):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {detail}")


class ToolchainMissing(FlakyRepairError):
    pass


class ToolchainCrashed(FlakyRepairError):
    def __init__(self, message: str, output: str = ""):
        self.output = output
        super().__init__(message)


class SelectorNotFound(FlakyRepairError):
    pass


# Reproduction

class MalformedTicket(FlakyRepairError):
    pass


class ExtractionFailed(FlakyRepairError):
    pass


class NoStatementAtLine(FlakyRepairError):
    def __init__(self, path: str, line: int):
        self.path = path
        self.line = line
        super().__init__(f"no statement at {path}:{line}")


# Instrumentation and call graphs

class InstrumentationError(FlakyRepairError):
    pass


class InjectionConflict(InstrumentationError):
    pass


class MalformedLine(FlakyRepairError):
    def __init__(self, line_number: int, text: str):
        self.line_number = line_number
        self.text = text
        super().__init__(f"malformed edge record at line {line_number}: {text!r}")


class UnresolvedNode(FlakyRepairError):
    def __init__(self, file: str, line: int, record: str = ""):
        self.file = file
        self.line = line
        self.record = record
        super().__init__(f"no function declared at {file}:{line} ({record})")


# Context collection

class OracleFailure(FlakyRepairError):
    pass


class EmptySelection(OracleFailure):
    pass


# Simplification and transplantation

class CaseNotFound(FlakyRepairError):
    pass


class OverlappingEdits(FlakyRepairError):
    pass


class SpanOutOfRange(FlakyRepairError):
    pass


class NeutralizationDiverged(FlakyRepairError):
    pass


class TableNotFound(FlakyRepairError):
    pass


class MergeParseError(FlakyRepairError):
    pass


# LLM responses

class ThoughtParseFailure(FlakyRepairError):
    pass


class PatchParseFailure(FlakyRepairError):
    pass


class NonTestEdit(PatchParseFailure):
    pass


class ReplayMiss(FlakyRepairError):
    def __init__(self, prompt_hash: str, purpose: Optional[str] = None):
        self.prompt_hash = prompt_hash
        self.purpose = purpose
        super().__init__(f"no recorded response for prompt {prompt_hash} ({purpose})")


class HttpError(FlakyRepairError):
    pass


# Orchestration

class TimeLimitExceeded(FlakyRepairError):
    pass


class RevertMismatch(FlakyRepairError):
    pass

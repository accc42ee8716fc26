"""
Domain types shared across the pipeline stages.
"""

import re
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class NodeId(NamedTuple):
    """Identity of a function in a workspace snapshot: its file and declaration line."""
    file: str
    line: int

    def label(self) -> str:
        return f"{self.file}:{self.line}"


class FunctionKind(str, Enum):
    NAMED = "named"
    METHOD = "method"
    ANONYMOUS = "anonymous"


class SubjectFunction(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Qualified identifier, e.g. 'Client.UpdateInfo' or 'TestFoo$anon1'.")
    file: str = Field(..., description="Workspace-relative path.")
    decl_line: int = Field(..., description="1-based line of the declaration.")
    body_span: Tuple[int, int] = Field(..., description="Byte offsets [start, end) of the whole declaration.")
    block_span: Optional[Tuple[int, int]] = Field(None, description="Byte offsets of the '{...}' body, if any.")
    source: str = Field(..., description="Verbatim text at body_span.")
    kind: FunctionKind

    @property
    def node_id(self) -> NodeId:
        return NodeId(self.file, self.decl_line)

    @property
    def short_name(self) -> str:
        """Unqualified name used for name-based goroutine linkage."""
        if self.kind == FunctionKind.ANONYMOUS:
            return self.name
        return self.name.rsplit(".", 1)[-1]


class AsyncLaunchSite(BaseModel):
    model_config = ConfigDict(frozen=True)

    enclosing: NodeId
    callee_name: str
    file: str
    line: int


class DiagnosticKind(str, Enum):
    UNUSED_VARIABLE = "unused-variable"
    OTHER = "other"


class CompileDiagnostic(BaseModel):
    file: str
    line: int
    column: int = 0
    message: str
    kind: DiagnosticKind = DiagnosticKind.OTHER

    def render(self) -> str:
        return f"{self.file}:{self.line}:{self.column}: {self.message}"


class Scope(str, Enum):
    CASE = "case"
    TARGET = "target"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    TIMEOUT = "timeout"
    BUILD_ERROR = "build-error"


class TestId(BaseModel):
    """One flaky test case in the ticket form target/func/case."""
    __test__ = False
    model_config = ConfigDict(frozen=True)

    target: str
    func: str
    case: str = ""

    def render(self) -> str:
        return f"{self.target}/{self.func}/{self.case}"

    def slug(self) -> str:
        return re.sub(r"[^A-Za-z0-9._-]+", "_", self.render()).strip("_")

    @property
    def go_case(self) -> str:
        """The case name as the Go test runner reports it."""
        return re.sub(r"\s", "_", self.case)

    @property
    def run_name(self) -> str:
        return f"{self.func}/{self.go_case}" if self.case else self.func


class RunOutcome(BaseModel):
    test: TestId
    run_index: int
    verdict: Verdict
    raw_output: str = ""
    duration: float = 0.0


class FailureRecord(BaseModel):
    message: str
    stack_trace: str = ""
    assertion_file: str
    assertion_line: int
    test_func_file: str = ""
    assertion_stmt: str = ""

    @property
    def key(self) -> Tuple[str, int]:
        return (self.message, self.assertion_line)


class ReproductionReport(BaseModel):
    test: TestId
    attempted_runs: int
    failures: List[FailureRecord] = Field(default_factory=list)
    scope_used: Scope = Scope.CASE
    reproduced: bool = False
    observed_failures: int = Field(0, description="Failing or timed-out runs in the scope that was used.")
    unextracted_failures: int = Field(0, description="Failing runs whose output yielded no valid record.")


class RootCause(str, Enum):
    SCHEDULE_RANDOMNESS = "schedule-randomness"
    UNORDERED_COLLECTION_ITERATION = "unordered-collection-iteration"
    TIMESTAMP_DISCREPANCY = "timestamp-discrepancy"
    STATE_POLLUTION = "state-pollution"
    TIME_DEPENDENT = "time-dependent"
    OTHER = "other"


class RootCauseCategory(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: RootCause
    label: str = ""

    @model_validator(mode="after")
    def _other_needs_label(self):
        if self.kind == RootCause.OTHER and not self.label.strip():
            raise ValueError("category 'other' requires a label")
        return self

    def render(self) -> str:
        return f"other({self.label})" if self.kind == RootCause.OTHER else self.kind.value


class Thought(BaseModel):
    category: RootCauseCategory
    explanation: str = Field(..., min_length=1)
    plan: str = Field(..., min_length=1)

    def render(self) -> str:
        return f"CATEGORY: {self.category.render()}\nEXPLANATION: {self.explanation}\nPLAN: {self.plan}"


class FailedThought(BaseModel):
    thought: Thought
    attempt_summaries: List[str] = Field(default_factory=list)


class ThoughtHistory(BaseModel):
    """Append-only record of thoughts whose fixes all failed."""
    failed: List[FailedThought] = Field(default_factory=list)

    def append(self, thought: Thought, summaries: List[str]) -> None:
        self.failed.append(FailedThought(thought=thought, attempt_summaries=list(summaries)))

    def summary(self) -> str:
        lines = []
        for index, entry in enumerate(self.failed, start=1):
            lines.append(f"Failed thought {index}: [{entry.thought.category.render()}] {entry.thought.explanation}")
            for summary in entry.attempt_summaries:
                lines.append(f"  - {summary}")
        return "\n".join(lines)


class ValidationVerdict(str, Enum):
    ACCEPTED = "accepted"
    COMPILE_FAILED = "compile-failed"
    TEST_FAILED = "test-failed"
    TIMEOUT = "timeout"


class ValidationResult(BaseModel):
    built: bool
    repair_rounds_used: int = 0
    reruns_passed: int = 0
    reruns_total: int = 0
    verdict: ValidationVerdict
    detail: str = ""
    final_text: str = Field("", description="Candidate text after compile repairs.")

    @model_validator(mode="after")
    def _accepted_is_clean(self):
        if self.verdict == ValidationVerdict.ACCEPTED and not (self.built and self.reruns_passed == self.reruns_total):
            raise ValueError("accepted validation requires a build and all reruns passing")
        return self

    def summary(self) -> str:
        if self.verdict == ValidationVerdict.COMPILE_FAILED:
            return f"compile-failed after {self.repair_rounds_used} repair round(s): {self.detail}"
        if self.verdict == ValidationVerdict.ACCEPTED:
            return f"accepted ({self.reruns_passed}/{self.reruns_total} reruns passed)"
        return f"{self.verdict.value} ({self.reruns_passed}/{self.reruns_total} reruns passed){': ' + self.detail if self.detail else ''}"


class ContextBundle(BaseModel):
    ordered: List[NodeId] = Field(default_factory=list, description="Selection order L, roots first.")
    final: List[NodeId] = Field(default_factory=list, description="Roots then filtered picks in L order.")
    rendered: str = ""
    fallbacks: List[str] = Field(default_factory=list, description="Oracle failures answered by the deterministic fallback.")


class AttemptRecord(BaseModel):
    m: int
    p: int
    n: int
    category: str = ""
    outcome: str
    summary: str = ""
    revert_hash: str = ""


class FixStatus(str, Enum):
    FIXED = "fixed"
    NOT_REPRODUCED = "not-reproduced"
    EXHAUSTED = "exhausted"
    TIMED_OUT = "timed-out"


class FixOutcome(BaseModel):
    status: FixStatus
    test: TestId
    diff: str = ""
    thought: Optional[Thought] = None
    attempts_log: List[AttemptRecord] = Field(default_factory=list)
    reproduction: Optional[ReproductionReport] = None
    primary_failure: Optional[FailureRecord] = None
    context_nodes: List[str] = Field(default_factory=list, description="name@file:line of the last context used.")
    notes: List[str] = Field(default_factory=list)
    llm_calls: int = 0

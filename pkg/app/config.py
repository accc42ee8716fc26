"""
Configuration models and loading.

Values come from three layers: command-line flags override the JSON config
file, which overrides the defaults below. The file has the sections
pipeline, traversal, backend and runner; unknown keys are rejected.
"""

import json
import logging
import os
from enum import Enum
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_TEST_COMMAND = "{go} test {raceflag} -json -count={runcount} -timeout={timeout}s -run {run} {target}"
DEFAULT_COMPILE_COMMAND = "{go} test -count=1 -run ^$ -exec true ./..."


class Strategy(str, Enum):
    GUIDED = "guided"
    BFS_ALL = "bfs-all"


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    M: int = Field(3, ge=1, description="Context attempts (outer loop)")
    P: int = Field(2, ge=1, description="Thoughts per context (middle loop)")
    N: int = Field(3, ge=1, description="Fix attempts per thought (inner loop)")
    runs: int = Field(1000, ge=1, description="Reruns for reproduction and for validation")
    time_limit: float = Field(7200.0, gt=0, description="Wall-clock seconds per ticket, reproduction included")
    repair_rounds: int = Field(2, ge=0, description="Compile-repair LLM rounds per fix")
    race: bool = Field(True, description="Run tests with the race detector")
    per_run_timeout: float = Field(300.0, gt=0, description="Seconds allowed for a single test run")
    simplify: bool = Field(True, description="Reduce table-driven tests to the target case before repair")
    trace_runs: Optional[int] = Field(
        None, ge=1, description="Instrumented single runs tried to capture a failing trace; null means the runs budget",
    )

    @property
    def trace_budget(self) -> int:
        return self.trace_runs if self.trace_runs is not None else self.runs


class TraversalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: Optional[int] = Field(None, ge=0, description="Depth limit; null means unbounded")
    k: int = Field(3, ge=1, description="Children selected per expanded node")
    F: int = Field(5, ge=0, description="Functions kept by the global filter")
    strategy: Strategy = Strategy.GUIDED


class BackendConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["replay", "http"] = "http"
    transcript: Optional[str] = Field(None, description="Transcript file for replay or record mode")
    record: bool = Field(False, description="Append every live response to the transcript")
    model: str = "gpt-4o"
    base_url: Optional[str] = Field(None, description="Chat-completion endpoint; defaults to OPENAI_BASE_URL")
    api_key_env: str = "OPENAI_API_KEY"
    selection_temperature: float = Field(0.0, ge=0, description="Used for select, filter and extract prompts")
    creative_temperature: Optional[float] = Field(None, ge=0, description="Used for thought, fix and repair; null keeps the provider default")
    request_timeout: float = Field(120.0, gt=0)

    @model_validator(mode="after")
    def _transcript_needed(self):
        if self.kind == "replay" and not self.transcript:
            raise ValueError("replay backend requires a transcript path")
        if self.record and self.kind != "http":
            raise ValueError("record mode wraps the http backend")
        if self.record and not self.transcript:
            raise ValueError("record mode requires a transcript path")
        return self


class RunnerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    go_binary: str = "go"
    test_command: str = DEFAULT_TEST_COMMAND
    compile_command: str = DEFAULT_COMPILE_COMMAND
    batch_size: int = Field(100, ge=1, description="Runs per test-binary invocation")
    compile_timeout: float = Field(600.0, gt=0)


class Settings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    traversal: TraversalConfig = Field(default_factory=TraversalConfig)
    backend: BackendConfig = Field(default_factory=BackendConfig)
    runner: RunnerConfig = Field(default_factory=RunnerConfig)


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        elif isinstance(value, dict):
            merged[key] = _merge({}, value)
        elif value is not None:
            merged[key] = value
    return merged


def read_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"{path} is not valid JSON ({e.msg} at line {e.lineno})")
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must contain a JSON object")
    return data


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """
    Build the effective settings.

    Args:
        path: optional JSON config file
        overrides: nested dict of flag values; None values are ignored

    Raises:
        ConfigError: naming the first offending key, e.g. 'traversal.k'.
    """
    data = read_config_file(path) if path else {}
    data = _merge(data, overrides or {})
    try:
        settings = Settings.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or "config"
        raise ConfigError(key, error["msg"])
    logger.debug(f"[CONFIG] effective settings: {settings.model_dump()}")
    return settings


def require_api_key(backend: BackendConfig) -> str:
    """Return the API key for the http backend, or raise before any work starts."""
    if backend.kind != "http":
        return ""
    key = os.getenv(backend.api_key_env, "")
    if not key:
        raise ConfigError("backend.api_key_env", f"environment variable {backend.api_key_env} is not set")
    return key

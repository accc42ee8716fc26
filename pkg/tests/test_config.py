import json

import pytest

from app.config import Strategy, load_config, require_api_key
from app.errors import ConfigError


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_defaults():
    settings = load_config()
    assert (settings.pipeline.M, settings.pipeline.P, settings.pipeline.N) == (3, 2, 3)
    assert settings.pipeline.runs == 1000
    assert settings.traversal.d is None
    assert (settings.traversal.k, settings.traversal.F) == (3, 5)
    assert settings.traversal.strategy == Strategy.GUIDED
    assert settings.backend.kind == "http"


def test_trace_budget_follows_runs_unless_set():
    assert load_config(overrides={"pipeline": {"runs": 300}}).pipeline.trace_budget == 300
    assert load_config(overrides={"pipeline": {"runs": 300, "trace_runs": 40}}).pipeline.trace_budget == 40


def test_flags_override_file_which_overrides_defaults(tmp_path):
    path = write_config(tmp_path, {"pipeline": {"runs": 200, "N": 5}, "traversal": {"k": 2}})
    settings = load_config(path, {"pipeline": {"runs": 50, "M": None}, "traversal": {"strategy": "bfs-all"}})
    assert settings.pipeline.runs == 50
    assert settings.pipeline.N == 5
    assert settings.pipeline.M == 3
    assert settings.traversal.k == 2
    assert settings.traversal.strategy == Strategy.BFS_ALL


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write_config(tmp_path, {"traversal": {"width": 4}}))
    assert info.value.key == "traversal.width"


def test_out_of_range_value_is_named():
    with pytest.raises(ConfigError) as info:
        load_config(overrides={"traversal": {"k": 0}})
    assert info.value.key == "traversal.k"


def test_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{pipeline: 1", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(broken))
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, [1, 2]))


def test_replay_needs_a_transcript():
    with pytest.raises(ConfigError) as info:
        load_config(overrides={"backend": {"kind": "replay"}})
    assert info.value.key.startswith("backend")
    settings = load_config(overrides={"backend": {"kind": "replay", "transcript": "t.jsonl"}})
    assert settings.backend.transcript == "t.jsonl"


def test_api_key_only_needed_for_http(monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    replay = load_config(overrides={"backend": {"kind": "replay", "transcript": "t.jsonl"}}).backend
    assert require_api_key(replay) == ""
    live = load_config().backend
    with pytest.raises(ConfigError) as info:
        require_api_key(live)
    assert info.value.key == "backend.api_key_env"
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
    assert require_api_key(live) == "sk-test"

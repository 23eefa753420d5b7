import sys
from pathlib import Path

import pytest

from wildcut.config import (
    ConfigError,
    apply_overrides,
    config_from_dict,
    default_config_text,
    load_config,
    parse_toml,
    validate_config,
)

STUB = str(Path(__file__).parent / "stub_worker.py")


def default_config():
    return config_from_dict(parse_toml(default_config_text()))


def test_default_config_is_clean():
    assert validate_config(default_config()) == []


def test_defaults_carry_published_values():
    config = default_config()
    assert config.loudness.target_dbfs == -20.0
    assert config.loudness.gain_clamp_db == 3.0
    assert config.segmentation.max_segment_s == 30.0
    assert config.segmentation.min_emit_s == 1.0
    assert config.filters.min_lang_confidence == 0.8
    assert config.filters.min_quality == 3.0
    assert config.filters.min_duration_s == 3.0
    assert config.filters.iqr_multiplier == 1.5
    assert config.filters.target_languages == frozenset({"en", "zh", "de", "fr", "ja", "ko"})


def test_invalid_value_is_diagnosed_with_field_name():
    data = parse_toml(default_config_text())
    data["filter"]["min_lang_confidence"] = 1.5
    diagnostics = validate_config(config_from_dict(data))
    assert any(d["field"] == "filter" and "[0, 1]" in d["message"] for d in diagnostics)


def test_all_violations_reported_not_first_only():
    data = parse_toml(default_config_text())
    data["filter"]["min_lang_confidence"] = 1.5
    data["vad"]["off_threshold_db"] = -10.0  # above on threshold
    data["run"] = {"parallel_sources": 0}
    diagnostics = validate_config(config_from_dict(data))
    fields = {d["field"] for d in diagnostics}
    assert {"filter", "vad", "run.parallel_sources"} <= fields


def test_parse_error_is_config_error():
    with pytest.raises(ConfigError, match="parse error"):
        parse_toml("definitely not toml [[[")


def test_overrides_apply_with_toml_literals():
    data = parse_toml(default_config_text())
    apply_overrides(data, ["filter.min_quality=3.5", "run.parallel_sources=2"])
    config = config_from_dict(data)
    assert config.filters.min_quality == 3.5
    assert config.parallel_sources == 2


def test_override_list_value():
    data = parse_toml(default_config_text())
    apply_overrides(data, ['filter.target_languages=["en","it"]'])
    config = config_from_dict(data)
    assert config.filters.target_languages == frozenset({"en", "it"})


def test_bad_override_rejected():
    with pytest.raises(ConfigError, match="KEY=VALUE"):
        apply_overrides({}, ["nonsense"])


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(default_config_text())
    config = load_config(path, overrides=["output.out_dir='elsewhere'"])
    assert config.out_dir == "elsewhere"


def test_worker_probe_flags_nonexecutable(tmp_path):
    data = parse_toml(default_config_text())
    data["backends"]["asr"] = {"kind": "worker", "command": ["/no/such/binary"]}
    diagnostics = validate_config(config_from_dict(data), probe_workers=True)
    assert any(d["field"] == "backends.asr" and "handshake failed" in d["message"] for d in diagnostics)


def test_worker_probe_accepts_healthy_stub():
    data = parse_toml(default_config_text())
    data["backends"]["asr"] = {
        "kind": "worker",
        "command": [sys.executable, STUB, "--stage", "asr"],
    }
    assert validate_config(config_from_dict(data), probe_workers=True) == []


def test_workspace_env_override(tmp_path, monkeypatch):
    config = default_config()
    monkeypatch.setenv("WILDCUT_TMPDIR", str(tmp_path / "scratch"))
    assert config.workspace_dir() == tmp_path / "scratch"
    monkeypatch.delenv("WILDCUT_TMPDIR")
    assert config.workspace_dir() == Path(config.out_dir) / "tmp"

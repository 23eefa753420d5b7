"""Run configuration: TOML file, dotted-key overrides, validation diagnostics.

Defaults that mirror published settings live in one table and are asserted
against the checked-in defaults_snapshot.json so they cannot drift silently.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .filters import FilterParams
from .protocol import STAGES, BackendDescriptor
from .standardize import LoudnessParams
from .vad import SegmentationParams, VadParams

AUDIO_EXTENSIONS = (".wav", ".flac", ".mp3", ".ogg")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    input_roots: list[str]
    out_dir: str
    language_hint: str | None = None
    parallel_sources: int = field(default_factory=lambda: os.cpu_count() or 1)
    keep_intermediates: bool = False
    stream_manifest: bool = False
    loudness: LoudnessParams = field(default_factory=LoudnessParams)
    vad: VadParams = field(default_factory=VadParams)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    filters: FilterParams = field(default_factory=FilterParams)
    backends: dict[str, BackendDescriptor] = field(default_factory=dict)

    def __post_init__(self):
        for stage in STAGES:
            self.backends.setdefault(
                stage,
                BackendDescriptor(stage=stage, kind="reference" if stage == "vad" else "mock"),
            )

    def workspace_dir(self) -> Path:
        env = os.environ.get("WILDCUT_TMPDIR")
        return Path(env) if env else Path(self.out_dir) / "tmp"


def default_config_text() -> str:
    return """\
[input]
roots = ["corpus"]
# language_hint = "en"

[output]
out_dir = "out"
keep_intermediates = false

[run]
# parallel_sources defaults to the CPU count
# parallel_sources = 4
stream_manifest = false

[loudness]
target_dbfs = -20.0
gain_clamp_db = 3.0
peak_ceiling = 0.999

[vad]
frame_ms = 30.0
hop_ms = 10.0
on_threshold_db = -35.0
off_threshold_db = -45.0
min_speech_s = 0.25
min_silence_s = 0.3
speech_pad_s = 0.1

[segmentation]
max_segment_s = 30.0
min_emit_s = 1.0
max_join_gap_s = 2.0

[filter]
target_languages = ["en", "zh", "de", "fr", "ja", "ko"]
min_lang_confidence = 0.8
min_quality = 3.0
min_duration_s = 3.0
iqr_multiplier = 1.5
# "segment" drops only offending segments; "source" discards a whole source
# on any language failure
language_scope = "segment"

[backends.separate]
kind = "mock"

[backends.diarize]
kind = "mock"

[backends.vad]
kind = "reference"

[backends.asr]
kind = "mock"
batch_size = 16

[backends.quality]
kind = "mock"

# A worker-backed stage looks like:
# [backends.asr]
# kind = "worker"
# command = ["node", "workers/dist/main.js", "--stage", "asr"]
# concurrency_slots = 2
# request_timeout_s = 300.0
# max_retries = 2
# batch_size = 16
"""


def parse_toml(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply dotted-key=value pairs; values parse as TOML literals."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        dotted, raw = item.split("=", 1)
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw  # bare string
        node = data
        keys = dotted.strip().split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} crosses a non-table value")
        node[keys[-1]] = value
    return data


def _backend_from_table(stage: str, table: dict) -> BackendDescriptor:
    return BackendDescriptor(
        stage=stage,
        kind=table.get("kind", "reference" if stage == "vad" else "mock"),
        command=tuple(table.get("command", ())),
        concurrency_slots=int(table.get("concurrency_slots", 1)),
        request_timeout_s=float(table.get("request_timeout_s", 300.0)),
        max_retries=int(table.get("max_retries", 2)),
        batch_size=int(table.get("batch_size", 16)),
        ping_interval_s=float(table.get("ping_interval_s", 60.0)),
        options=dict(table.get("options", {})),
    )


def config_from_dict(data: dict) -> RunConfig:
    inp = data.get("input", {})
    out = data.get("output", {})
    run = data.get("run", {})
    loud = data.get("loudness", {})
    vad = data.get("vad", {})
    seg = data.get("segmentation", {})
    filt = data.get("filter", {})
    backends = {
        stage: _backend_from_table(stage, data.get("backends", {}).get(stage, {}))
        for stage in STAGES
    }
    config = RunConfig(
        input_roots=list(inp.get("roots", [])),
        out_dir=str(out.get("out_dir", "out")),
        language_hint=inp.get("language_hint"),
        parallel_sources=int(run.get("parallel_sources", os.cpu_count() or 1)),
        keep_intermediates=bool(out.get("keep_intermediates", False)),
        stream_manifest=bool(run.get("stream_manifest", False)),
        loudness=LoudnessParams(
            target_dbfs=float(loud.get("target_dbfs", -20.0)),
            gain_clamp_db=float(loud.get("gain_clamp_db", 3.0)),
            peak_ceiling=float(loud.get("peak_ceiling", 0.999)),
        ),
        vad=VadParams(
            frame_ms=float(vad.get("frame_ms", 30.0)),
            hop_ms=float(vad.get("hop_ms", 10.0)),
            on_threshold_db=float(vad.get("on_threshold_db", -35.0)),
            off_threshold_db=float(vad.get("off_threshold_db", -45.0)),
            min_speech_s=float(vad.get("min_speech_s", 0.25)),
            min_silence_s=float(vad.get("min_silence_s", 0.3)),
            speech_pad_s=float(vad.get("speech_pad_s", 0.1)),
        ),
        segmentation=SegmentationParams(
            max_segment_s=float(seg.get("max_segment_s", 30.0)),
            min_emit_s=float(seg.get("min_emit_s", 1.0)),
            max_join_gap_s=float(seg.get("max_join_gap_s", 2.0)),
        ),
        filters=FilterParams(
            target_languages=frozenset(filt.get("target_languages", sorted(FilterParams().target_languages))),
            min_lang_confidence=float(filt.get("min_lang_confidence", 0.80)),
            min_quality=float(filt.get("min_quality", 3.0)),
            min_duration_s=float(filt.get("min_duration_s", 3.0)),
            iqr_multiplier=float(filt.get("iqr_multiplier", 1.5)),
            language_scope=str(filt.get("language_scope", "segment")),
        ),
        backends=backends,
    )
    return config


def load_config(path: str | Path, overrides: list[str] | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = parse_toml(text)
    if overrides:
        apply_overrides(data, overrides)
    return config_from_dict(data)


def validate_config(config: RunConfig, probe_workers: bool = False) -> list[dict]:
    """Collect every invariant violation, not just the first.

    Each diagnostic is {"field", "message"}; an empty list means clean.
    """
    diagnostics: list[dict] = []

    def check(field_name: str, fn) -> None:
        try:
            fn()
        except ValueError as exc:
            diagnostics.append({"field": field_name, "message": str(exc)})

    check("loudness", config.loudness.validate)
    check("vad", config.vad.validate)
    check("segmentation", config.segmentation.validate)
    check("filter", config.filters.validate)
    if config.parallel_sources < 1:
        diagnostics.append({"field": "run.parallel_sources", "message": "must be >= 1"})
    if not config.input_roots:
        diagnostics.append({"field": "input.roots", "message": "no input roots configured"})
    for stage, desc in config.backends.items():
        check(f"backends.{stage}", desc.validate)

    for key, expected in _defaults_snapshot().items():
        actual = _defaults_actual().get(key)
        if actual != expected:
            diagnostics.append(
                {
                    "field": key,
                    "message": f"built-in default {actual!r} drifted from snapshot {expected!r}",
                }
            )

    if probe_workers:
        from .protocol import BackendUnavailable, spawn_worker

        for stage, desc in config.backends.items():
            if desc.kind != "worker" or any(d["field"] == f"backends.{stage}" for d in diagnostics):
                continue
            try:
                client = spawn_worker(desc)
                client.close()
            except BackendUnavailable as exc:
                diagnostics.append({"field": f"backends.{stage}", "message": f"handshake failed: {exc}"})
    return diagnostics


def _defaults_actual() -> dict:
    loud = LoudnessParams()
    seg = SegmentationParams()
    filt = FilterParams()
    return {
        "loudness.target_dbfs": loud.target_dbfs,
        "loudness.gain_clamp_db": loud.gain_clamp_db,
        "sample_rate_hz": 24000,
        "segmentation.max_segment_s": seg.max_segment_s,
        "segmentation.min_emit_s": seg.min_emit_s,
        "filter.min_duration_s": filt.min_duration_s,
        "filter.min_lang_confidence": filt.min_lang_confidence,
        "filter.min_quality": filt.min_quality,
        "filter.iqr_multiplier": filt.iqr_multiplier,
        "filter.target_languages": sorted(filt.target_languages),
    }


def _defaults_snapshot() -> dict:
    text = resources.files("wildcut").joinpath("defaults_snapshot.json").read_text("utf-8")
    return json.loads(text)

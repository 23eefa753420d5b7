"""Drives sources through the stage graph with bounded parallelism.

Each source is processed end to end by one worker thread; results land in a
per-source state file, and an append-only journal records stage completions
ahead of anything becoming visible in the final manifest. Finalization reads
state files in sorted order, which makes manifest bytes independent of
scheduling. Resume skips sources whose journal and state agree and reruns
the rest from scratch; every stage is deterministic, so re-derived output is
bit-identical to what a cached intermediate would have produced.
"""

from __future__ import annotations

import glob as globmod
import hashlib
import json
import os
import shutil
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from .backends import BackendSet, make_backend_set
from .config import AUDIO_EXTENSIONS, RunConfig
from .filters import apply_filters
from .model import (
    AudioSource,
    DropRecord,
    SegmentRecord,
    decode_drop,
    decode_record,
    encode_drop,
    encode_record,
    round6,
    source_id_for,
)
from .protocol import StageError
from .report import build_report, phase_stats, write_report
from .standardize import standardize
from .vad import diarization_postprocess, intersect_with_turns, segment_chunks, slice_audio
from .wavio import DecodeError, read_wav, write_wav, write_wav_f32

STATE_VERSION = 1
RAW_PROBE_MAX_S = 30.0


class PlanError(Exception):
    pass


class ResumeError(Exception):
    pass


class AbortedRun(Exception):
    """Raised when a run is cut short by an injected fault (tests only)."""


@dataclass
class RunOutcome:
    report: dict
    failed_sources: int
    out_dir: Path

    @property
    def exit_code(self) -> int:
        return 2 if self.failed_sources else 0


def plan(config: RunConfig) -> list[AudioSource]:
    """Discover input files: deterministic lexicographic order, deduplicated."""
    found: dict[str, tuple[str, str]] = {}  # canonical -> (source_id, path)
    for root in config.input_roots:
        root_path = Path(root)
        if root_path.is_dir():
            if not os.access(root_path, os.R_OK):
                raise PlanError(f"input root not readable: {root}")
            for ext in AUDIO_EXTENSIONS:
                for p in root_path.rglob(f"*{ext}"):
                    canonical = str(p.resolve())
                    found.setdefault(canonical, (source_id_for(p, root=root_path), canonical))
        elif root_path.is_file():
            canonical = str(root_path.resolve())
            found.setdefault(canonical, (source_id_for(canonical), canonical))
        elif globmod.has_magic(root):
            for match in globmod.glob(root, recursive=True):
                p = Path(match)
                if p.is_file() and p.suffix.lower() in AUDIO_EXTENSIONS:
                    canonical = str(p.resolve())
                    found.setdefault(canonical, (source_id_for(canonical), canonical))
        else:
            raise PlanError(f"input root does not exist: {root}")
    if not found:
        raise PlanError(f"no input audio found under {config.input_roots}")
    sources = [
        AudioSource(source_id=sid, path=path, language_hint=config.language_hint)
        for _, (sid, path) in sorted(found.items())
    ]
    return sources


def _hash_text(text: str) -> str:
    return hashlib.blake2b(text.encode("utf-8"), digest_size=16).hexdigest()


def input_set_hash(sources: list[AudioSource]) -> str:
    return _hash_text("\n".join(f"{s.source_id}:{s.path}" for s in sources))


class Journal:
    """Single-writer append-only JSONL journal."""

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8")

    def append(self, entry: dict) -> None:
        with self._lock:
            self._fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    @staticmethod
    def read(path: Path) -> list[dict]:
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(json.loads(line))
        return entries


# --- per-source pipeline -------------------------------------------------------


def _process_source(
    src: AudioSource,
    config: RunConfig,
    backends: BackendSet,
    out_dir: Path,
    workspace: Path,
) -> tuple[dict, list[dict]]:
    """Run one source through every stage; returns (state, journal events)."""
    events: list[dict] = []
    state: dict = {
        "version": STATE_VERSION,
        "source_id": src.source_id,
        "path": src.path,
        "kept_lines": [],
        "drop_lines": [],
        "raw_duration_s": None,
        "raw_quality": None,
        "candidates": [],
        "per_stage_s": {},
    }
    work = workspace / src.source_id
    work.mkdir(parents=True, exist_ok=True)
    slice_dir = out_dir / "wav" / src.source_id
    if slice_dir.exists():
        shutil.rmtree(slice_dir)

    def stage_done(stage: str, started: float, content_hash: str) -> None:
        wall = time.monotonic() - started
        state["per_stage_s"][stage] = state["per_stage_s"].get(stage, 0.0) + wall
        events.append(
            {
                "type": "stage",
                "source_id": src.source_id,
                "stage": stage,
                "outcome": "ok",
                "wall_s": round(wall, 6),
                "hash": content_hash,
            }
        )

    def fail(stage: str, reason: str, message: str, started: float) -> tuple[dict, list[dict]]:
        state["drop_lines"].append(
            encode_drop(DropRecord(id=src.source_id, stage=stage, reason=reason))
        )
        state["failed"] = {"stage": stage, "reason": reason, "message": message}
        events.append(
            {
                "type": "stage",
                "source_id": src.source_id,
                "stage": stage,
                "outcome": "failed",
                "reason": reason,
                "wall_s": round(time.monotonic() - started, 6),
            }
        )
        _cleanup_workspace(work, config)
        return state, events

    origin = Path(src.path)

    # standardize
    started = time.monotonic()
    try:
        std = standardize(src.path, config.loudness, source_id=src.source_id)
    except DecodeError as exc:
        return fail("standardize", "decode_error", str(exc), started)
    state["raw_duration_s"] = round6(std.duration_s)
    std_path = work / "std.wav"
    write_wav_f32(std_path, std.samples, std.sample_rate)
    stage_done(
        "standardize",
        started,
        _hash_text(f"{len(std.samples)}:{std.rms_dbfs}:{std.applied_gain_db}"),
    )

    # separate
    started = time.monotonic()
    try:
        vocals_path = backends.separate.run(std_path, origin)
    except StageError as exc:
        return fail("separate", "backend_error", str(exc), started)
    stage_done("separate", started, _hash_text(str(vocals_path.name)))

    # diarize
    started = time.monotonic()
    try:
        turns = backends.diarize.run(vocals_path, origin)
    except StageError as exc:
        return fail("diarize", "backend_error", str(exc), started)
    turns = diarization_postprocess(turns, std.duration_s)
    stage_done(
        "diarize",
        started,
        _hash_text(json.dumps([[t.speaker_label, t.start_s, t.end_s] for t in turns])),
    )

    # vad + segmentation + slice export
    started = time.monotonic()
    try:
        regions = backends.vad.run(vocals_path, origin)
    except StageError as exc:
        return fail("segment", "backend_error", str(exc), started)
    chunks = intersect_with_turns(regions, turns, config.vad.min_speech_s)
    segments, discarded = segment_chunks(chunks, config.segmentation, src.source_id)
    for s, e, _spk in discarded:
        state["drop_lines"].append(
            encode_drop(
                DropRecord(id=src.source_id, stage="segment", reason="too_short",
                           duration_s=round6(e - s))
            )
        )
    vocals = read_wav(vocals_path)
    mono = vocals.samples[0] if vocals.channels == 1 else vocals.samples.mean(axis=0)
    slice_dir.mkdir(parents=True, exist_ok=True)
    slice_paths: list[Path] = []
    for seg in segments:
        out_path = slice_dir / f"{seg.segment_id}.wav"
        write_wav(out_path, slice_audio(mono, vocals.sample_rate, seg.start_s, seg.end_s),
                  vocals.sample_rate)
        slice_paths.append(out_path)
    stage_done(
        "segment",
        started,
        _hash_text(json.dumps([[g.segment_id, g.start_s, g.end_s] for g in segments])),
    )

    # raw-phase quality probe: first <= 30 s of the standardized audio
    probe_path = work / "raw_probe.wav"
    probe_len = min(len(std.samples), int(RAW_PROBE_MAX_S * std.sample_rate))
    if probe_len > 0:
        write_wav(probe_path, std.samples[:probe_len], std.sample_rate)
        try:
            state["raw_quality"] = round6(backends.quality.run(probe_path, origin))
        except StageError:
            state["raw_quality"] = None

    # transcribe in batches
    started = time.monotonic()
    asr_results: list = [None] * len(segments)
    batch = max(1, config.backends["asr"].batch_size)
    try:
        for at in range(0, len(segments), batch):
            window = list(range(at, min(at + batch, len(segments))))
            items = [
                {
                    "audio": str(slice_paths[i]),
                    "origin": str(origin),
                    "duration_s": segments[i].duration_s,
                }
                for i in window
            ]
            for i, result in zip(window, backends.asr.run_batch(items, src.language_hint)):
                asr_results[i] = result
    except StageError as exc:
        return fail("transcribe", "backend_error", str(exc), started)
    transcribe_hash_parts = []
    candidate_records: list[SegmentRecord] = []
    for seg, slice_path, result in zip(segments, slice_paths, asr_results):
        if result.failed:
            state["drop_lines"].append(
                encode_drop(
                    DropRecord(id=seg.segment_id, stage="transcribe",
                               reason="backend_error", duration_s=round6(seg.duration_s))
                )
            )
            continue
        transcribe_hash_parts.append(f"{seg.segment_id}:{result.text}")
        candidate_records.append((seg, slice_path, result))
    stage_done("transcribe", started, _hash_text("\n".join(transcribe_hash_parts)))

    # quality scoring + filtering (per-source barrier)
    started = time.monotonic()
    records: list[SegmentRecord] = []
    for seg, slice_path, result in candidate_records:
        try:
            score = backends.quality.run(slice_path, origin)
        except StageError:
            state["drop_lines"].append(
                encode_drop(
                    DropRecord(id=seg.segment_id, stage="filter",
                               reason="backend_error", duration_s=round6(seg.duration_s))
                )
            )
            continue
        rec = SegmentRecord.build(
            segment_id=seg.segment_id,
            wav_path=str(Path("wav") / src.source_id / f"{seg.segment_id}.wav"),
            text=result.text,
            language=result.language,
            lang_confidence=result.lang_confidence,
            speaker_label=seg.speaker_label,
            duration_s=seg.duration_s,
            dnsmos_ovrl=score,
            source_id=src.source_id,
        )
        records.append(rec)
        state["candidates"].append([rec.duration_s, rec.dnsmos_ovrl])

    kept, filter_drops = apply_filters(records, config.filters)
    kept_ids = {r.segment_id for r in kept}
    state["kept_lines"] = [encode_record(r) for r in kept]
    state["drop_lines"].extend(encode_drop(d) for d in filter_drops)
    if not config.keep_intermediates:
        for seg, slice_path, _result in candidate_records:
            if seg.segment_id not in kept_ids:
                slice_path.unlink(missing_ok=True)
        for seg in segments:
            # segments that never became records (asr/quality failures)
            p = slice_dir / f"{seg.segment_id}.wav"
            if seg.segment_id not in kept_ids and p.exists():
                p.unlink()
        if not any(slice_dir.iterdir()):
            slice_dir.rmdir()
    stage_done("filter", started, _hash_text("\n".join(state["kept_lines"])))

    _cleanup_workspace(work, config)
    return state, events


def _cleanup_workspace(work: Path, config: RunConfig) -> None:
    if not config.keep_intermediates and work.exists():
        shutil.rmtree(work, ignore_errors=True)


# --- run / resume ---------------------------------------------------------------


def _state_path(out_dir: Path, source_id: str) -> Path:
    return out_dir / "state" / f"{source_id}.json"


def _write_state(out_dir: Path, state: dict) -> str:
    path = _state_path(out_dir, state["source_id"])
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(state, ensure_ascii=False, sort_keys=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(payload, encoding="utf-8")
    tmp.replace(path)
    return _hash_text(payload)


def _load_state(out_dir: Path, source_id: str) -> tuple[dict, str] | None:
    path = _state_path(out_dir, source_id)
    if not path.is_file():
        return None
    text = path.read_text(encoding="utf-8")
    try:
        state = json.loads(text)
    except json.JSONDecodeError:
        return None
    if state.get("version") != STATE_VERSION:
        return None
    return state, _hash_text(text)


def _config_hash(config: RunConfig) -> str:
    basis = {
        "loudness": vars(config.loudness),
        "vad": vars(config.vad),
        "segmentation": vars(config.segmentation),
        "filter": {
            "target_languages": sorted(config.filters.target_languages),
            "min_lang_confidence": config.filters.min_lang_confidence,
            "min_quality": config.filters.min_quality,
            "min_duration_s": config.filters.min_duration_s,
            "iqr_multiplier": config.filters.iqr_multiplier,
            "language_scope": config.filters.language_scope,
        },
        "backends": {s: d.kind for s, d in sorted(config.backends.items())},
    }
    return _hash_text(json.dumps(basis, sort_keys=True))


def run(
    config: RunConfig,
    resume: bool = False,
    abort_after_sources: int | None = None,
) -> RunOutcome:
    """Execute (or resume) a full pipeline run; returns the final report.

    Fatal errors (bad config, failed backend handshakes) raise; per-source
    problems become failed journal entries and drop records.
    """
    run_started = time.monotonic()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = plan(config)
    in_hash = input_set_hash(sources)

    journal_path = out_dir / "journal.jsonl"
    done_ok: set[str] = set()
    if resume:
        if not journal_path.is_file():
            raise ResumeError(f"no journal at {journal_path}; nothing to resume")
        entries = Journal.read(journal_path)
        metas = [e for e in entries if e.get("type") == "run_meta"]
        if not metas:
            raise ResumeError("journal has no run_meta entry")
        if metas[-1].get("input_set_hash") != in_hash:
            raise ResumeError(
                "input set changed since the journaled run; refusing to resume"
            )
        recorded: dict[str, str] = {}
        for e in entries:
            if e.get("type") == "source_done" and e.get("ok"):
                recorded[e["source_id"]] = e.get("state_hash", "")
        for sid, expected_hash in recorded.items():
            loaded = _load_state(out_dir, sid)
            if loaded is not None and loaded[1] == expected_hash:
                done_ok.add(sid)
    elif journal_path.exists():
        journal_path.unlink()
        shutil.rmtree(out_dir / "state", ignore_errors=True)
        shutil.rmtree(out_dir / "wav", ignore_errors=True)

    journal = Journal(journal_path)
    journal.append(
        {
            "type": "run_meta",
            "input_set_hash": in_hash,
            "config_hash": _config_hash(config),
            "n_sources": len(sources),
            "resume": resume,
        }
    )

    workspace = config.workspace_dir()
    workspace.mkdir(parents=True, exist_ok=True)
    backends = make_backend_set(config.backends, config.vad)

    todo = [s for s in sources if s.source_id not in done_ok]
    abort_event = threading.Event()
    done_count = len(done_ok)
    failed_sources = 0
    manifest_stream = None
    if config.stream_manifest:
        manifest_stream = open(out_dir / "manifest.jsonl", "a" if resume else "w", encoding="utf-8")

    def work_one(src: AudioSource):
        if abort_event.is_set():
            return None
        return _process_source(src, config, backends, out_dir, workspace)

    aborted = False
    try:
        with ThreadPoolExecutor(max_workers=max(1, config.parallel_sources)) as pool:
            futures = {pool.submit(work_one, src): src for src in todo}
            for future in as_completed(futures):
                src = futures[future]
                result = future.result()
                if result is None:
                    continue
                state, events = result
                state_hash = _write_state(out_dir, state)
                for event in events:
                    journal.append(event)
                source_ok = "failed" not in state
                journal.append(
                    {
                        "type": "source_done",
                        "source_id": src.source_id,
                        "ok": source_ok,
                        "state_hash": state_hash,
                    }
                )
                if manifest_stream is not None:
                    for line in state["kept_lines"]:
                        manifest_stream.write(line + "\n")
                    manifest_stream.flush()
                if not source_ok:
                    failed_sources += 1
                done_count += 1
                if abort_after_sources is not None and done_count >= abort_after_sources:
                    abort_event.set()
                    aborted = True
    finally:
        backends.close()
        if manifest_stream is not None:
            manifest_stream.close()

    if aborted:
        journal.append({"type": "run_aborted", "done": done_count})
        journal.close()
        raise AbortedRun(f"aborted after {done_count} sources")

    wall_s = time.monotonic() - run_started
    report = _finalize(config, sources, out_dir, wall_s, journal)
    journal.append({"type": "run_finished", "wall_s": round(wall_s, 6)})
    journal.close()
    return RunOutcome(report=report, failed_sources=failed_sources, out_dir=out_dir)


def _finalize(
    config: RunConfig,
    sources: list[AudioSource],
    out_dir: Path,
    wall_s: float,
    journal: Journal,
) -> dict:
    manifest_lines: list[str] = []
    drop_lines: list[str] = []
    raw_durations: list[float] = []
    raw_qualities: list[float] = []
    candidates: list[tuple[float, float]] = []
    kept_pairs: list[tuple[float, float]] = []
    per_language_s: dict[str, float] = {}
    drop_counts: dict[str, int] = {}
    per_stage_s: dict[str, float] = {}

    for src in sorted(sources, key=lambda s: s.source_id):
        loaded = _load_state(out_dir, src.source_id)
        if loaded is None:
            continue
        state, _ = loaded
        if state.get("raw_duration_s"):
            raw_durations.append(state["raw_duration_s"])
            if state.get("raw_quality") is not None:
                raw_qualities.append(state["raw_quality"])
        for dur, mos in state.get("candidates", []):
            candidates.append((dur, mos))
        for line in state["kept_lines"]:
            manifest_lines.append(line)
            rec = decode_record(line)
            kept_pairs.append((rec.duration_s, rec.dnsmos_ovrl))
            per_language_s[rec.language] = per_language_s.get(rec.language, 0.0) + rec.duration_s
        for line in state["drop_lines"]:
            drop_lines.append(line)
            drop_counts_key = decode_drop(line).reason
            drop_counts[drop_counts_key] = drop_counts.get(drop_counts_key, 0) + 1
        for stage, secs in state.get("per_stage_s", {}).items():
            per_stage_s[stage] = per_stage_s.get(stage, 0.0) + secs

    if not config.stream_manifest:
        (out_dir / "manifest.jsonl").write_text(
            "".join(line + "\n" for line in manifest_lines), encoding="utf-8"
        )
    (out_dir / "drops.jsonl").write_text(
        "".join(line + "\n" for line in drop_lines), encoding="utf-8"
    )

    raw_total_h = sum(raw_durations) / 3600.0
    raw_stats = phase_stats(raw_durations, raw_qualities, raw_total_h)
    unfiltered_stats = phase_stats(
        [d for d, _ in candidates], [q for _, q in candidates], raw_total_h
    )
    processed_stats = phase_stats(
        [d for d, _ in kept_pairs], [q for _, q in kept_pairs], raw_total_h
    )
    report = build_report(
        phases={
            "raw": raw_stats,
            "processed_unfiltered": unfiltered_stats,
            "processed": processed_stats,
        },
        per_language_h={k: v / 3600.0 for k, v in per_language_s.items()},
        drop_counts=drop_counts,
        wall_clock_s=wall_s,
        raw_total_h=raw_total_h,
        per_stage_s=per_stage_s,
    )
    write_report(report, out_dir / "report.json")
    return report


def measure_throughput(journal_path: str | Path, raw_total_h: float) -> dict:
    """Aggregate wall clock and per-stage seconds from a journal."""
    entries = Journal.read(Path(journal_path))
    wall = sum(e.get("wall_s", 0.0) for e in entries if e.get("type") == "run_finished")
    per_stage: dict[str, float] = {}
    for e in entries:
        if e.get("type") == "stage" and e.get("outcome") == "ok":
            per_stage[e["stage"]] = per_stage.get(e["stage"], 0.0) + e.get("wall_s", 0.0)
    h_per_min = raw_total_h / (wall / 60.0) if wall > 0 and raw_total_h > 0 else None
    return {"h_per_min": h_per_min, "wall_s": wall, "per_stage_s": per_stage}

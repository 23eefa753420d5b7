"""Turn diarization output plus voice-activity evidence into 1-30 s segments.

Includes the deterministic energy-hysteresis VAD used when no neural VAD
backend is configured, overlap excision for diarization turns, and the
greedy same-speaker concatenation that produces emitted segments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Segment, SpeakerTurn, VadChunk, segment_id_for


@dataclass(frozen=True)
class VadParams:
    frame_ms: float = 30.0
    hop_ms: float = 10.0
    on_threshold_db: float = -35.0  # relative to whole-signal RMS
    off_threshold_db: float = -45.0
    min_speech_s: float = 0.25
    min_silence_s: float = 0.3
    speech_pad_s: float = 0.1

    def validate(self) -> None:
        if self.off_threshold_db >= self.on_threshold_db:
            raise ValueError("off_threshold_db must be below on_threshold_db")
        for name in ("frame_ms", "hop_ms", "min_speech_s", "min_silence_s", "speech_pad_s"):
            if getattr(self, name) < 0 or (name in ("frame_ms", "hop_ms") and getattr(self, name) <= 0):
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SegmentationParams:
    max_segment_s: float = 30.0
    min_emit_s: float = 1.0
    max_join_gap_s: float = 2.0

    def validate(self) -> None:
        if not self.max_segment_s > self.min_emit_s > 0:
            raise ValueError("must satisfy max_segment_s > min_emit_s > 0")
        if self.max_join_gap_s < 0:
            raise ValueError("max_join_gap_s must be >= 0")


def diarization_postprocess(turns: list[SpeakerTurn], duration_s: float) -> list[SpeakerTurn]:
    """Clip turns to bounds and excise any region where two speakers overlap.

    Same-speaker overlaps are merged first (they are diarizer artifacts, not
    real cross-talk). Regions covered by two or more distinct speakers are
    removed from every involved turn, splitting turns as needed. The result
    is sorted and pairwise disjoint.
    """
    clipped: dict[str, list[tuple[float, float]]] = {}
    for t in turns:
        start = max(0.0, t.start_s)
        end = min(duration_s, t.end_s)
        if end > start:
            clipped.setdefault(t.speaker_label, []).append((start, end))

    merged: list[tuple[float, float, str]] = []
    for label, ivs in clipped.items():
        ivs.sort()
        cur_s, cur_e = ivs[0]
        for s, e in ivs[1:]:
            if s <= cur_e:
                cur_e = max(cur_e, e)
            else:
                merged.append((cur_s, cur_e, label))
                cur_s, cur_e = s, e
        merged.append((cur_s, cur_e, label))

    # Sweep boundaries; keep only sub-intervals covered by exactly one turn.
    bounds = sorted({b for s, e, _ in merged for b in (s, e)})
    out: list[SpeakerTurn] = []
    open_turn: SpeakerTurn | None = None
    for lo, hi in zip(bounds, bounds[1:]):
        active = [label for s, e, label in merged if s <= lo and e >= hi]
        if len(active) == 1:
            label = active[0]
            if open_turn is not None and open_turn.speaker_label == label and open_turn.end_s == lo:
                open_turn = SpeakerTurn(label, open_turn.start_s, hi)
            else:
                if open_turn is not None:
                    out.append(open_turn)
                open_turn = SpeakerTurn(label, lo, hi)
        else:
            if open_turn is not None:
                out.append(open_turn)
                open_turn = None
    if open_turn is not None:
        out.append(open_turn)
    return sorted(out, key=lambda t: t.start_s)


def _frame_levels_db(samples: np.ndarray, sample_rate: int, params: VadParams) -> tuple[np.ndarray, float, int]:
    """Per-frame energy in dB relative to the whole signal's mean square."""
    frame = max(1, int(round(sample_rate * params.frame_ms / 1000.0)))
    hop = max(1, int(round(sample_rate * params.hop_ms / 1000.0)))
    x = np.asarray(samples, dtype=np.float64)
    total_ms = float(np.mean(np.square(x))) if x.size else 0.0
    if x.size < frame or total_ms == 0.0:
        return np.empty(0), hop / sample_rate, frame

    sq = np.square(x)
    csum = np.concatenate([[0.0], np.cumsum(sq)])
    starts = np.arange(0, x.size - frame + 1, hop)
    frame_ms_energy = (csum[starts + frame] - csum[starts]) / frame
    with np.errstate(divide="ignore"):
        levels = 10.0 * np.log10(frame_ms_energy / total_ms)
    return levels, hop / sample_rate, frame


def reference_vad(
    samples: np.ndarray, sample_rate: int, params: VadParams | None = None
) -> list[tuple[float, float]]:
    """Energy VAD with hysteresis: enter above on_threshold, leave only after
    min_silence_s below off_threshold. Regions shorter than min_speech_s are
    discarded, then padded by speech_pad_s and merged where pads collide.
    """
    params = params or VadParams()
    params.validate()
    duration_s = len(samples) / sample_rate
    levels, hop_s, frame = _frame_levels_db(samples, sample_rate, params)
    if levels.size == 0:
        return []
    frame_s = frame / sample_rate
    # A frame overlapping an onset by a single sample already trips the
    # threshold; the previous (quiet) frame bounds the onset to the frame's
    # last hop, so the start estimate is frame_start + frame - hop.
    onset_lead = max(0.0, frame_s - hop_s)

    regions: list[tuple[float, float]] = []
    in_speech = False
    start_t = 0.0
    silence_started: float | None = None
    min_silence_frames = int(np.ceil(params.min_silence_s / hop_s))
    silence_run = 0

    for i, level in enumerate(levels):
        t = i * hop_s
        if not in_speech:
            if level > params.on_threshold_db:
                in_speech = True
                start_t = t + onset_lead
                silence_run = 0
                silence_started = None
        else:
            if level < params.off_threshold_db:
                if silence_run == 0:
                    silence_started = t
                silence_run += 1
                if silence_run >= min_silence_frames:
                    regions.append((start_t, silence_started))
                    in_speech = False
                    silence_run = 0
                    silence_started = None
            else:
                silence_run = 0
                silence_started = None
    if in_speech:
        end = silence_started if silence_started is not None else duration_s
        regions.append((start_t, end))

    regions = [(s, min(e, duration_s)) for s, e in regions if e > s]
    regions = [(s, e) for s, e in regions if e - s >= params.min_speech_s]

    padded = [
        (max(0.0, s - params.speech_pad_s), min(duration_s, e + params.speech_pad_s))
        for s, e in regions
    ]
    merged: list[tuple[float, float]] = []
    for s, e in padded:
        if merged and s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


def intersect_with_turns(
    vad_regions: list[tuple[float, float]],
    turns: list[SpeakerTurn],
    min_chunk_s: float = 0.25,
) -> list[VadChunk]:
    """Pairwise interval intersection; chunks inherit the turn's speaker.

    Both inputs must be sorted by start; output is sorted and each chunk
    lies inside exactly one turn.
    """
    chunks: list[VadChunk] = []
    i = j = 0
    while i < len(vad_regions) and j < len(turns):
        rs, re_ = vad_regions[i]
        turn = turns[j]
        lo = max(rs, turn.start_s)
        hi = min(re_, turn.end_s)
        if hi - lo >= min_chunk_s:
            chunks.append(VadChunk(lo, hi, turn.speaker_label))
        if re_ < turn.end_s:
            i += 1
        else:
            j += 1
    return sorted(chunks, key=lambda c: c.start_s)


def _hard_split(chunk: VadChunk, max_s: float) -> list[VadChunk]:
    if chunk.duration_s <= max_s:
        return [chunk]
    pieces = []
    pos = chunk.start_s
    while chunk.end_s - pos > max_s:
        pieces.append(VadChunk(pos, pos + max_s, chunk.speaker_label))
        pos += max_s
    if chunk.end_s > pos:
        pieces.append(VadChunk(pos, chunk.end_s, chunk.speaker_label))
    return pieces


def segment_chunks(
    chunks: list[VadChunk],
    params: SegmentationParams | None = None,
    source_id: str = "src",
) -> tuple[list[Segment], list[tuple[float, float, str]]]:
    """Greedy left-to-right concatenation of same-speaker voice chunks.

    A chunk joins the open segment iff it has the same speaker, the gap to
    the previous chunk is at most max_join_gap_s, and the resulting span
    stays within max_segment_s. Oversized single chunks are hard-split
    beforehand. Returns (segments, discarded) where discarded lists
    (start_s, end_s, speaker) spans flushed below min_emit_s.
    """
    params = params or SegmentationParams()
    params.validate()
    ordered: list[VadChunk] = []
    for c in sorted(chunks, key=lambda c: (c.start_s, c.end_s)):
        ordered.extend(_hard_split(c, params.max_segment_s))

    emitted: list[tuple[float, float, str]] = []
    discarded: list[tuple[float, float, str]] = []

    open_start = open_end = 0.0
    open_speaker: str | None = None
    prev_chunk_end = 0.0

    def flush() -> None:
        if open_speaker is None:
            return
        span = open_end - open_start
        if span >= params.min_emit_s:
            emitted.append((open_start, open_end, open_speaker))
        else:
            discarded.append((open_start, open_end, open_speaker))

    for c in ordered:
        if open_speaker is None:
            open_start, open_end, open_speaker = c.start_s, c.end_s, c.speaker_label
        elif (
            c.speaker_label == open_speaker
            and c.start_s - prev_chunk_end <= params.max_join_gap_s
            and c.end_s - open_start <= params.max_segment_s
        ):
            open_end = c.end_s
        else:
            flush()
            open_start, open_end, open_speaker = c.start_s, c.end_s, c.speaker_label
        prev_chunk_end = c.end_s
    flush()

    segments = [
        Segment(segment_id_for(source_id, i), spk, s, e)
        for i, (s, e, spk) in enumerate(emitted)
    ]
    return segments, discarded


def slice_audio(samples: np.ndarray, sample_rate: int, start_s: float, end_s: float) -> np.ndarray:
    """Half-open sample range [round(start*sr), round(end*sr))."""
    n = len(samples)
    lo = int(round(start_s * sample_rate))
    hi = int(round(end_s * sample_rate))
    if lo < 0 or hi > n or lo >= hi:
        raise ValueError(f"segment [{start_s}, {end_s}] outside audio bounds")
    return samples[lo:hi]

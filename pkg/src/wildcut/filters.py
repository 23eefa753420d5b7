"""Segment filtering: language/confidence, quality score, duration floor,
and per-source character-duration outlier rejection via the 1.5x IQR fence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import DropRecord, SegmentRecord

DEFAULT_TARGET_LANGUAGES = frozenset({"en", "zh", "de", "fr", "ja", "ko"})


@dataclass(frozen=True)
class FilterParams:
    target_languages: frozenset[str] = DEFAULT_TARGET_LANGUAGES
    min_lang_confidence: float = 0.80
    min_quality: float = 3.0
    min_duration_s: float = 3.0
    iqr_multiplier: float = 1.5
    # "segment" drops only the offending segment; "source" discards the whole
    # source once any of its segments fails the language criterion
    language_scope: str = "segment"
    # criterion 4 needs defensible quartiles; below this many segments the
    # source skips outlier flagging entirely
    min_segments_for_iqr: int = 4

    def validate(self) -> None:
        if not 0.0 <= self.min_lang_confidence <= 1.0:
            raise ValueError("min_lang_confidence must be in [0, 1]")
        if not 1.0 <= self.min_quality <= 5.0:
            raise ValueError("min_quality must be in [1, 5]")
        if self.iqr_multiplier < 0:
            raise ValueError("iqr_multiplier must be >= 0")
        if self.min_duration_s < 0:
            raise ValueError("min_duration_s must be >= 0")
        if self.language_scope not in ("segment", "source"):
            raise ValueError("language_scope must be 'segment' or 'source'")


def quantile(values: list[float], p: float) -> float:
    """Linear interpolation between order statistics at rank h = (n-1)*p.

    ``values`` must already be sorted ascending.
    """
    if not values:
        raise ValueError("quantile of empty list")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    h = (len(values) - 1) * p
    lo = math.floor(h)
    hi = math.ceil(h)
    return values[lo] + (h - lo) * (values[hi] - values[lo])


def char_dur_outlier_flags(avg_char_durs: list[float], iqr_multiplier: float = 1.5,
                           min_n: int = 4) -> list[bool]:
    """Flag values strictly outside [Q1 - m*IQR, Q3 + m*IQR].

    Sources with fewer than ``min_n`` values get no flags: quartiles over a
    couple of points say nothing about outliers.
    """
    if not avg_char_durs:
        raise ValueError("no values")
    for v in avg_char_durs:
        if v <= 0:
            raise ValueError("character durations must be positive")
    if len(avg_char_durs) < min_n:
        return [False] * len(avg_char_durs)
    ordered = sorted(avg_char_durs)
    q1 = quantile(ordered, 0.25)
    q3 = quantile(ordered, 0.75)
    iqr = q3 - q1
    lo = q1 - iqr_multiplier * iqr
    hi = q3 + iqr_multiplier * iqr
    return [v < lo or v > hi for v in avg_char_durs]


def apply_filters(
    records: list[SegmentRecord], params: FilterParams | None = None
) -> tuple[list[SegmentRecord], list[DropRecord]]:
    """Filter one source's records; returns (kept, drops), order preserved.

    Criteria run in order and the first failure wins: target language and
    confidence, then quality (strictly above the threshold), then the
    duration floor. Empty transcripts drop next. The IQR fence runs last,
    over the source's records that survived everything else.
    """
    params = params or FilterParams()
    params.validate()

    def language_failure(rec: SegmentRecord) -> str | None:
        if rec.language not in params.target_languages:
            return "not_target_language"
        if rec.lang_confidence < params.min_lang_confidence:
            return "low_lang_confidence"
        return None

    source_language_reason: str | None = None
    if params.language_scope == "source":
        for rec in records:
            source_language_reason = language_failure(rec)
            if source_language_reason is not None:
                break

    survivors: list[SegmentRecord] = []
    outcome: dict[str, str] = {}
    for rec in records:
        lang_reason = language_failure(rec) or source_language_reason
        if lang_reason is not None:
            outcome[rec.segment_id] = lang_reason
        elif not rec.dnsmos_ovrl > params.min_quality:
            outcome[rec.segment_id] = "low_quality_score"
        elif rec.duration_s < params.min_duration_s:
            outcome[rec.segment_id] = "too_short"
        elif rec.avg_char_dur_s is None:
            outcome[rec.segment_id] = "empty_transcript"
        else:
            survivors.append(rec)

    if survivors:
        flags = char_dur_outlier_flags(
            [r.avg_char_dur_s for r in survivors],
            params.iqr_multiplier,
            params.min_segments_for_iqr,
        )
        for rec, flagged in zip(survivors, flags):
            if flagged:
                outcome[rec.segment_id] = "char_dur_outlier"

    kept: list[SegmentRecord] = []
    drops: list[DropRecord] = []
    for rec in records:
        reason = outcome.get(rec.segment_id)
        if reason is None:
            kept.append(rec)
        else:
            drops.append(
                DropRecord(id=rec.segment_id, stage="filter", reason=reason,
                           duration_s=rec.duration_s)
            )
    return kept, drops

"""Domain types shared by every pipeline stage, plus the JSONL manifest codec.

The manifest format is deliberately rigid: one record per line, fixed key
order, floats printed with 6 decimal places. Equal records always serialize
to equal bytes, which is what makes end-to-end runs byte-comparable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path, PurePosixPath

# Stage order of the pipeline; a source never skips ahead.
STAGE_ORDER = (
    "standardize",
    "separate",
    "diarize",
    "segment",
    "transcribe",
    "filter",
)

SOURCE_STATUSES = (
    "pending",
    "standardized",
    "separated",
    "diarized",
    "segmented",
    "transcribed",
    "filtered",
    "done",
    "failed",
)

DROP_REASONS = (
    "not_target_language",
    "low_lang_confidence",
    "low_quality_score",
    "too_short",
    "char_dur_outlier",
    "decode_error",
    "backend_error",
    "empty_transcript",
)

TARGET_SAMPLE_RATE = 24000

FLOAT_DECIMALS = 6


class ValidationError(ValueError):
    """A record violates its invariants; ``field`` names the offender."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ManifestParseError(ValueError):
    """A manifest line is not valid JSON; ``offset`` is the byte offset."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset


def source_id_for(path: str | Path, root: str | Path | None = None) -> str:
    """Derive a stable source id from a file path.

    The id is the hex of a 128-bit hash over the POSIX form of ``path``
    relative to ``root`` (or the bare path when no root is given). It never
    reads file bytes, so it is cheap and stable across resume.
    """
    p = Path(path)
    if root is not None:
        try:
            rel = p.resolve().relative_to(Path(root).resolve())
        except ValueError:
            rel = PurePosixPath(p.name)
    else:
        rel = PurePosixPath(p.as_posix())
    canonical = PurePosixPath(rel).as_posix()
    return hashlib.blake2b(canonical.encode("utf-8"), digest_size=16).hexdigest()


def segment_id_for(source_id: str, index: int) -> str:
    return f"{source_id}_{index:05d}"


def round6(x: float) -> float:
    return round(float(x), FLOAT_DECIMALS)


def count_chars(text: str) -> int:
    """Non-whitespace code points; the unit for character-duration stats."""
    return sum(1 for c in text if not c.isspace())


@dataclass(frozen=True)
class AudioSource:
    """One raw in-the-wild recording plus processing status and provenance."""

    source_id: str
    path: str
    duration_s: float = 0.0
    language_hint: str | None = None
    status: str = "pending"
    fail_reason: str | None = None

    def advanced(self, status: str, fail_reason: str | None = None) -> "AudioSource":
        if status not in SOURCE_STATUSES:
            raise ValidationError("status", f"unknown status {status!r}")
        return replace(self, status=status, fail_reason=fail_reason)


@dataclass(frozen=True)
class SpeakerTurn:
    speaker_label: str
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True, slots=True)
class VadChunk:
    start_s: float
    end_s: float
    speaker_label: str

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True, slots=True)
class Segment:
    segment_id: str
    speaker_label: str
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


# Fixed manifest key order. Changing this changes manifest bytes.
RECORD_KEYS = (
    "segment_id",
    "wav_path",
    "text",
    "language",
    "lang_confidence",
    "speaker_label",
    "duration_s",
    "dnsmos_ovrl",
    "avg_char_dur_s",
    "source_id",
)

_RECORD_FLOAT_KEYS = frozenset(
    {"lang_confidence", "duration_s", "dnsmos_ovrl", "avg_char_dur_s"}
)


@dataclass(frozen=True)
class SegmentRecord:
    """One manifest row. Floats are canonicalized to 6 decimals on build.

    ``avg_char_dur_s`` is None exactly when ``text`` has no non-whitespace
    characters; such records cannot appear in a final manifest (they are
    dropped during filtering) but must survive encode/decode round trips.
    """

    segment_id: str
    wav_path: str
    text: str
    language: str
    lang_confidence: float
    speaker_label: str
    duration_s: float
    dnsmos_ovrl: float
    avg_char_dur_s: float | None
    source_id: str

    @classmethod
    def build(
        cls,
        *,
        segment_id: str,
        wav_path: str,
        text: str,
        language: str,
        lang_confidence: float,
        speaker_label: str,
        duration_s: float,
        dnsmos_ovrl: float,
        source_id: str,
    ) -> "SegmentRecord":
        """Construct a record, deriving avg_char_dur_s and rounding floats."""
        duration_s = round6(duration_s)
        n_chars = count_chars(text)
        avg = round6(duration_s / n_chars) if n_chars else None
        return cls(
            segment_id=segment_id,
            wav_path=wav_path,
            text=text,
            language=language,
            lang_confidence=round6(lang_confidence),
            speaker_label=speaker_label,
            duration_s=duration_s,
            dnsmos_ovrl=round6(dnsmos_ovrl),
            avg_char_dur_s=avg,
            source_id=source_id,
        )

    def validate(self) -> None:
        for name in ("segment_id", "wav_path", "language", "speaker_label", "source_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise ValidationError(name, "must be a non-empty string")
        if not isinstance(self.text, str):
            raise ValidationError("text", "must be a string")
        for name in ("lang_confidence", "duration_s", "dnsmos_ovrl"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(name, "must be a finite number")
        if self.duration_s <= 0:
            raise ValidationError("duration_s", "must be > 0")
        if not 0.0 <= self.lang_confidence <= 1.0:
            raise ValidationError("lang_confidence", "must be in [0, 1]")
        n_chars = count_chars(self.text)
        if n_chars == 0:
            if self.avg_char_dur_s is not None:
                raise ValidationError(
                    "avg_char_dur_s", "must be null when text has no characters"
                )
        else:
            if self.avg_char_dur_s is None:
                raise ValidationError("avg_char_dur_s", "missing for non-empty text")
            expected = self.duration_s / n_chars
            if abs(self.avg_char_dur_s - expected) > 5e-6:
                raise ValidationError(
                    "avg_char_dur_s",
                    f"inconsistent with duration_s / {n_chars} chars",
                )


def encode_record(rec: SegmentRecord) -> str:
    """Serialize one record to a single JSON line (no trailing newline).

    Byte-deterministic: fixed key order, floats at 6 decimals, UTF-8 text.
    """
    rec.validate()
    parts = []
    for key in RECORD_KEYS:
        value = getattr(rec, key)
        if key in _RECORD_FLOAT_KEYS:
            rendered = "null" if value is None else f"{value:.{FLOAT_DECIMALS}f}"
        else:
            rendered = json.dumps(value, ensure_ascii=False)
        parts.append(f"{json.dumps(key)}:{rendered}")
    return "{" + ",".join(parts) + "}"


def decode_record(line: str) -> SegmentRecord:
    """Parse one manifest line back into a validated SegmentRecord."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        offset = len(line[: exc.pos].encode("utf-8"))
        raise ManifestParseError(offset, exc.msg) from exc
    if not isinstance(obj, dict):
        raise ManifestParseError(0, "record must be a JSON object")
    for key in RECORD_KEYS:
        if key not in obj:
            raise ValidationError(key, "missing key")
    rec = SegmentRecord(**{key: obj[key] for key in RECORD_KEYS})
    rec.validate()
    return rec


DROP_KEYS = ("id", "stage", "reason", "duration_s")


@dataclass(frozen=True)
class DropRecord:
    """Accounting row for anything not kept; ``id`` is a segment or source id.

    ``duration_s`` is 0 when the dropped duration is unknown (e.g. a source
    that failed to decode).
    """

    id: str
    stage: str
    reason: str
    duration_s: float = 0.0

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("id", "must be non-empty")
        if self.reason not in DROP_REASONS:
            raise ValidationError("reason", f"unknown reason {self.reason!r}")
        if self.stage not in STAGE_ORDER:
            raise ValidationError("stage", f"unknown stage {self.stage!r}")


def encode_drop(drop: DropRecord) -> str:
    drop.validate()
    parts = []
    for key in DROP_KEYS:
        value = getattr(drop, key)
        if key == "duration_s":
            parts.append(f"{json.dumps(key)}:{value:.{FLOAT_DECIMALS}f}")
        else:
            parts.append(f"{json.dumps(key)}:{json.dumps(value, ensure_ascii=False)}")
    return "{" + ",".join(parts) + "}"


def decode_drop(line: str) -> DropRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        offset = len(line[: exc.pos].encode("utf-8"))
        raise ManifestParseError(offset, exc.msg) from exc
    for key in DROP_KEYS:
        if key not in obj:
            raise ValidationError(key, "missing key")
    drop = DropRecord(**{key: obj[key] for key in DROP_KEYS})
    drop.validate()
    return drop


@dataclass
class ManifestSummary:
    records: int = 0
    total_duration_s: float = 0.0
    errors: list[str] = field(default_factory=list)


def validate_manifest(path: str | Path) -> ManifestSummary:
    """Check every line of a manifest; counts valid records and sums duration.

    Raises OSError when the file cannot be read at all; per-line problems go
    into ``summary.errors`` with their 1-based line number.
    """
    summary = ManifestSummary()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                rec = decode_record(line)
            except (ManifestParseError, ValidationError) as exc:
                summary.errors.append(f"line {lineno}: {exc}")
                continue
            summary.records += 1
            summary.total_duration_s += rec.duration_s
    summary.total_duration_s = round6(summary.total_duration_s)
    return summary


def record_fields() -> tuple[str, ...]:
    """Documented manifest schema, in serialization order."""
    assert RECORD_KEYS == tuple(f.name for f in fields(SegmentRecord))
    return RECORD_KEYS

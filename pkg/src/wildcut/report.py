"""Three-phase run statistics: raw, processed without filtering, processed.

The JSON report is byte-deterministic apart from the "timing" object, which
holds everything wall-clock dependent. The text rendering mirrors the
min/max/avg±std duration and quality columns plus total hours with retention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

PHASE_LABELS = {
    "raw": "Raw",
    "processed_unfiltered": "Processed w/o Filtering",
    "processed": "Processed",
}


@dataclass(frozen=True)
class StatsBlock:
    duration_min: float
    duration_max: float
    duration_mean: float
    duration_std: float
    quality_min: float
    quality_max: float
    quality_mean: float
    quality_std: float
    total_duration_h: float
    retention_pct: float

    def as_dict(self) -> dict:
        return {
            "duration_s": {
                "min": round(self.duration_min, 6),
                "max": round(self.duration_max, 6),
                "mean": round(self.duration_mean, 6),
                "std": round(self.duration_std, 6),
            },
            "quality": {
                "min": round(self.quality_min, 6),
                "max": round(self.quality_max, 6),
                "mean": round(self.quality_mean, 6),
                "std": round(self.quality_std, 6),
            },
            "total_duration_h": round(self.total_duration_h, 6),
            "retention_pct": round(self.retention_pct, 6),
        }


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n  # population std
    return mean, math.sqrt(var)


def compute_stats(durations: list[float], qualities: list[float], raw_total_h: float) -> StatsBlock:
    """Summarize one phase. Empty input yields a zeros block, retention 0."""
    if len(durations) != len(qualities):
        raise ValueError("durations and qualities must be aligned")
    return phase_stats(durations, qualities, raw_total_h)


def phase_stats(durations: list[float], qualities: list[float], raw_total_h: float) -> StatsBlock:
    """Like compute_stats, but tolerates a quality list that covers only a
    subset of the durations (raw-phase probes can fail independently)."""
    if not durations:
        return StatsBlock(0, 0, 0, 0, 0, 0, 0, 0, 0.0, 0.0)
    d_mean, d_std = _mean_std(durations)
    if qualities:
        q_mean, q_std = _mean_std(qualities)
        q_min, q_max = min(qualities), max(qualities)
    else:
        q_mean = q_std = q_min = q_max = 0.0
    total_h = sum(durations) / 3600.0
    retention = 100.0 * total_h / raw_total_h if raw_total_h > 0 else 0.0
    return StatsBlock(
        duration_min=min(durations),
        duration_max=max(durations),
        duration_mean=d_mean,
        duration_std=d_std,
        quality_min=q_min,
        quality_max=q_max,
        quality_mean=q_mean,
        quality_std=q_std,
        total_duration_h=total_h,
        retention_pct=retention,
    )


def build_report(
    phases: dict[str, StatsBlock],
    per_language_h: dict[str, float],
    drop_counts: dict[str, int],
    wall_clock_s: float,
    raw_total_h: float,
    per_stage_s: dict[str, float] | None = None,
) -> dict:
    """Assemble the run report; wall-clock facts all live under "timing"."""
    for phase in ("raw", "processed_unfiltered", "processed"):
        if phase not in phases:
            raise ValueError(f"missing phase {phase!r}")
    throughput = None
    if wall_clock_s > 0:
        throughput = round(raw_total_h / (wall_clock_s / 60.0), 6)
    return {
        "phases": {name: phases[name].as_dict() for name in ("raw", "processed_unfiltered", "processed")},
        "per_language_h": {k: round(v, 6) for k, v in sorted(per_language_h.items())},
        "drop_counts": {k: drop_counts[k] for k in sorted(drop_counts)},
        "timing": {
            "wall_clock_s": round(wall_clock_s, 6),
            "throughput_h_per_min": throughput,
            "per_stage_s": {k: round(v, 6) for k, v in sorted((per_stage_s or {}).items())},
        },
    }


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def throughput_h_per_min(raw_total_h: float, wall_clock_s: float) -> float | None:
    """Hours of raw audio per wall-clock minute; None when nothing ran."""
    if wall_clock_s <= 0 or raw_total_h <= 0:
        return None
    return raw_total_h / (wall_clock_s / 60.0)


def render_table(report: dict) -> str:
    """Aligned three-row text table of the phase statistics."""
    headers = [
        "Phase",
        "min(s)",
        "max(s)",
        "avg±std(s)",
        "MOS min",
        "MOS max",
        "MOS avg±std",
        "Total (hours)",
    ]
    rows = [headers]
    for phase in ("raw", "processed_unfiltered", "processed"):
        block = report["phases"][phase]
        dur = block["duration_s"]
        mos = block["quality"]
        rows.append(
            [
                PHASE_LABELS[phase],
                f"{dur['min']:.2f}",
                f"{dur['max']:.2f}",
                f"{dur['mean']:.2f} ± {dur['std']:.2f}",
                f"{mos['min']:.2f}",
                f"{mos['max']:.2f}",
                f"{mos['mean']:.2f} ± {mos['std']:.2f}",
                f"{block['total_duration_h']:.2f} ({block['retention_pct']:.2f}%)",
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(widths))))
    timing = report.get("timing", {})
    tp = timing.get("throughput_h_per_min")
    if tp is not None:
        lines.append("")
        lines.append(f"throughput: {tp:.2f} h of raw audio per minute "
                     f"({timing.get('wall_clock_s', 0):.1f} s wall clock)")
    return "\n".join(lines) + "\n"

"""Synthetic-corpus benchmark: measures orchestration throughput with the
configured backends (mocks by default, i.e. zero-cost inference).
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from .config import RunConfig
from .model import TARGET_SAMPLE_RATE
from .orchestrator import measure_throughput, run
from .wavio import write_wav

BENCH_SOURCE_S = 120.0


def generate_bench_corpus(
    root: Path, total_hours: float, seed: int = 77, source_s: float = BENCH_SOURCE_S
) -> Path:
    """Write sine-burst sources with sidecar fixtures totaling total_hours."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rate = TARGET_SAMPLE_RATE
    remaining = total_hours * 3600.0
    index = 0
    while remaining > 0:
        duration = min(source_s, max(30.0, remaining))
        n = int(duration * rate)
        x = 1e-5 * rng.standard_normal(n)
        t = 0.0
        while t < duration - 2.0:
            burst = float(rng.uniform(3.0, 12.0))
            gap = float(rng.uniform(0.4, 1.5))
            start = int(t * rate)
            end = min(n, int((t + burst) * rate))
            freq = float(rng.uniform(120, 800))
            x[start:end] += 0.35 * np.sin(2 * np.pi * freq * np.arange(end - start) / rate)
            t += burst + gap
        path = root / f"bench{index:04d}.wav"
        write_wav(path, np.clip(x, -1, 1), rate)
        Path(str(path) + ".txt").write_text(
            "synthetic speech for throughput measurement number %d" % index, encoding="utf-8"
        )
        Path(str(path) + ".lang.json").write_text(
            json.dumps({"language": "en", "confidence": 0.97}), encoding="utf-8"
        )
        remaining -= duration
        index += 1
    return root


def bench(config: RunConfig, synthetic_hours: float, corpus_dir: Path | None = None) -> dict:
    """Generate a corpus, run the pipeline, and report throughput."""
    out_dir = Path(config.out_dir)
    corpus = corpus_dir or out_dir / "bench_corpus"
    gen_started = time.monotonic()
    generate_bench_corpus(corpus, synthetic_hours)
    gen_wall = time.monotonic() - gen_started

    config.input_roots = [str(corpus)]
    outcome = run(config)
    raw_h = outcome.report["phases"]["raw"]["total_duration_h"]
    throughput = measure_throughput(out_dir / "journal.jsonl", raw_h)
    return {
        "synthetic_hours": synthetic_hours,
        "raw_total_h": raw_h,
        "corpus_generation_s": round(gen_wall, 3),
        "wall_clock_s": round(outcome.report["timing"]["wall_clock_s"], 3),
        "h_per_min": outcome.report["timing"]["throughput_h_per_min"],
        "per_stage_s": throughput["per_stage_s"],
        "failed_sources": outcome.failed_sources,
    }

"""Command-line front end: run, resume, validate, stats, bench.

Logging goes to stderr; stdout carries the machine-readable product (JSON
with --json, otherwise human tables), so pipelines can consume the output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import bench
from .config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    default_config_text,
    load_config,
    parse_toml,
    validate_config,
)
from .orchestrator import PlanError, ResumeError, RunOutcome, run
from .protocol import BackendUnavailable
from .report import render_table, report_to_json

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_SOURCE_FAILURES = 2


def log(message: str) -> None:
    print(message, file=sys.stderr)


def _load(args) -> RunConfig:
    overrides = args.set or []
    if args.config:
        config = load_config(args.config, overrides)
    else:
        data = parse_toml(default_config_text())
        from .config import apply_overrides

        apply_overrides(data, overrides)
        config = config_from_dict(data)
    if getattr(args, "out_dir", None):
        config.out_dir = args.out_dir
    return config


def cmd_run(args) -> int:
    config = _load(args)
    diagnostics = validate_config(config)
    if diagnostics:
        for d in diagnostics:
            log(f"config error: {d['field']}: {d['message']}")
        return EXIT_FATAL
    outcome: RunOutcome = run(config, resume=args.command == "resume")
    if args.json:
        sys.stdout.write(report_to_json(outcome.report))
    else:
        sys.stdout.write(render_table(outcome.report))
    if outcome.failed_sources:
        log(f"{outcome.failed_sources} source(s) failed; see drops.jsonl")
    return outcome.exit_code


def cmd_validate(args) -> int:
    config = _load(args)
    diagnostics = validate_config(config, probe_workers=args.probe_workers)
    payload = {"ok": not diagnostics, "diagnostics": diagnostics}
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK if not diagnostics else EXIT_FATAL


def cmd_stats(args) -> int:
    report_path = Path(args.out_dir) / "report.json"
    if not report_path.is_file():
        log(f"no report at {report_path}; run `wildcut run` or `wildcut resume` first")
        return EXIT_FATAL
    raw = report_path.read_text(encoding="utf-8")
    if args.json:
        sys.stdout.write(raw)
    else:
        sys.stdout.write(render_table(json.loads(raw)))
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load(args)
    if args.parallel:
        config.parallel_sources = args.parallel
    if not args.out_dir and not args.config:
        config.out_dir = "bench_out"
    result = bench(config, args.hours)
    if args.json:
        sys.stdout.write(json.dumps(result, indent=2) + "\n")
    else:
        hpm = result["h_per_min"]
        sys.stdout.write(
            f"benchmark: {result['raw_total_h']:.3f} h of audio in "
            f"{result['wall_clock_s']:.1f} s -> "
            f"{hpm:.2f} h/min\n" if hpm else "benchmark produced no throughput\n"
        )
        for stage, secs in sorted(result["per_stage_s"].items()):
            sys.stdout.write(f"  {stage:<12} {secs:8.2f} s\n")
    return EXIT_OK if not result["failed_sources"] else EXIT_SOURCE_FAILURES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wildcut",
        description="Turn long in-the-wild recordings into a filtered, annotated segment corpus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", help="TOML config path" + ("" if needs_config else " (optional)"))
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config value (dotted keys, TOML literals)")
        p.add_argument("--out-dir", help="override output directory")
        p.add_argument("--json", action="store_true", help="machine-readable stdout")

    p_run = sub.add_parser("run", help="process the configured corpus")
    common(p_run)
    p_resume = sub.add_parser("resume", help="continue an interrupted run")
    common(p_resume)

    p_validate = sub.add_parser("validate", help="check a config without running")
    common(p_validate)
    p_validate.add_argument("--probe-workers", action="store_true",
                            help="dry handshake against worker commands")

    p_stats = sub.add_parser("stats", help="render the report of a finished run")
    p_stats.add_argument("--out-dir", required=True)
    p_stats.add_argument("--json", action="store_true")

    p_bench = sub.add_parser("bench", help="throughput benchmark on a synthetic corpus")
    common(p_bench, needs_config=False)
    p_bench.add_argument("--hours", type=float, default=0.1,
                         help="synthetic corpus size in hours (default 0.1)")
    p_bench.add_argument("--parallel", type=int, help="worker thread count")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "resume": cmd_run,
        "validate": cmd_validate,
        "stats": cmd_stats,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, PlanError, ResumeError, BackendUnavailable) as exc:
        log(f"fatal: {exc}")
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())

"""Worker conformance driver: proves any worker executable honors the wire
protocol before it is trusted inside a run.

Checks handshake, request/response correlation, error surfacing, timeout
recovery, and ping/pong, using a tiny generated WAV as the probe payload.
The same suite runs against reference stubs and real model workers.

Usage: python -m wildcut.conformance --stage vad -- node worker.js --stage vad
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import threading
from pathlib import Path

import numpy as np

from .protocol import BackendDescriptor, BackendUnavailable, StageError, WorkerClient
from .wavio import write_wav


def _probe_wav(directory: Path) -> Path:
    rate = 24000
    t = np.arange(rate) / rate
    path = directory / "probe.wav"
    write_wav(path, 0.4 * np.sin(2 * np.pi * 440 * t), rate)
    return path


def _stage_payload(stage: str, wav: Path, workdir: Path) -> dict:
    if stage == "separate":
        return {"audio": str(wav), "out": str(workdir / "vocals.wav")}
    if stage == "asr":
        return {"items": [{"audio": str(wav)}], "language_hint": None}
    return {"audio": str(wav)}


def _invalid_payload(stage: str, workdir: Path) -> dict:
    # asr item-level problems are per-item errors by contract, so the asr
    # probe malforms the batch itself
    if stage == "asr":
        return {"items": "not-a-list", "language_hint": None}
    if stage == "separate":
        return {"audio": str(workdir / "missing.wav"), "out": str(workdir / "v.wav")}
    return {"audio": str(workdir / "missing.wav")}


def _validate_reply(stage: str, reply) -> str | None:
    if not isinstance(reply, dict):
        return f"reply is not an object: {reply!r}"
    if stage == "separate":
        if "audio" not in reply:
            return "separate reply lacks 'audio'"
        if not Path(reply["audio"]).is_file():
            return f"separated file missing: {reply['audio']}"
    elif stage == "diarize":
        if not isinstance(reply.get("turns"), list):
            return "diarize reply lacks 'turns' list"
    elif stage == "vad":
        if not isinstance(reply.get("regions"), list):
            return "vad reply lacks 'regions' list"
    elif stage == "asr":
        items = reply.get("items")
        if not isinstance(items, list) or len(items) != 1:
            return "asr reply items not aligned with request"
    elif stage == "quality":
        score = reply.get("score")
        if not isinstance(score, (int, float)) or not 1.0 <= float(score) <= 5.0:
            return f"quality score out of range: {score!r}"
    return None


def conformance(worker_argv: list[str], stage: str, request_timeout_s: float = 60.0) -> dict:
    """Run every protocol check against a worker command; returns the report."""
    checks: list[dict] = []

    def record(name: str, passed: bool, detail: str = "") -> None:
        checks.append({"name": name, "passed": passed, "detail": detail})

    workdir = Path(tempfile.mkdtemp(prefix="wildcut-conformance-"))
    wav = _probe_wav(workdir)
    desc = BackendDescriptor(
        stage=stage,
        kind="worker",
        command=tuple(worker_argv),
        concurrency_slots=4,
        request_timeout_s=request_timeout_s,
        max_retries=1,
        ping_interval_s=3600.0,
    )

    client = None
    try:
        client = WorkerClient(desc)
        record("handshake", True, f"hello accepted for stage {stage!r}")
    except BackendUnavailable as exc:
        record("handshake", False, str(exc))
        return {"stage": stage, "passed": False, "checks": checks}

    try:
        # correlation: concurrent requests must come back to their callers
        results: dict[int, object] = {}
        errors: list[str] = []

        def call(i: int) -> None:
            payload = _stage_payload(stage, wav, workdir / f"c{i}")
            (workdir / f"c{i}").mkdir(exist_ok=True)
            try:
                results[i] = client.request(payload)
            except StageError as exc:
                errors.append(f"request {i}: {exc}")

        threads = [threading.Thread(target=call, args=(i,)) for i in range(3)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=request_timeout_s * 4)
        problems = [e for e in errors]
        for i, reply in results.items():
            issue = _validate_reply(stage, reply)
            if issue:
                problems.append(f"request {i}: {issue}")
        if len(results) + len(errors) < 3:
            problems.append(f"only {len(results) + len(errors)}/3 requests terminated")
        record("correlation", not problems, "; ".join(problems))

        # error surfacing: a bad request must produce an error reply, and the
        # worker must stay alive for the next request
        try:
            client.request(_invalid_payload(stage, workdir), timeout_s=30.0)
            record("error", False, "invalid request did not produce an error reply")
        except StageError as exc:
            follow_up_ok = True
            detail = f"error surfaced: {exc}"
            try:
                reply = client.request(_stage_payload(stage, wav, workdir))
                issue = _validate_reply(stage, reply)
                if issue:
                    follow_up_ok = False
                    detail += f"; follow-up invalid: {issue}"
            except StageError as exc2:
                follow_up_ok = False
                detail += f"; worker did not survive: {exc2}"
            record("error", follow_up_ok, detail)

        # timeout machinery: an unmeetable deadline must surface as a stage
        # error after retries, and the restarted worker must answer again
        try:
            client.request(_stage_payload(stage, wav, workdir), timeout_s=1e-6)
            record("timeout", True, "worker responded faster than the probe deadline")
        except StageError:
            try:
                reply = client.request(_stage_payload(stage, wav, workdir))
                issue = _validate_reply(stage, reply)
                record("timeout", issue is None, issue or "recovered after forced restart")
            except StageError as exc:
                record("timeout", False, f"no recovery after timeout restart: {exc}")

        # ping: a pong must come back promptly
        client._pong_seen.clear()
        try:
            client._send({"type": "ping"})
            pong = client._pong_seen.wait(10.0)
            record("ping", pong, "" if pong else "no pong within 10 s")
        except Exception as exc:  # noqa: BLE001
            record("ping", False, str(exc))
    finally:
        client.close()

    return {"stage": stage, "passed": all(c["passed"] for c in checks), "checks": checks}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run the worker conformance suite.")
    parser.add_argument("--stage", required=True)
    parser.add_argument("--timeout", type=float, default=60.0)
    parser.add_argument("worker", nargs=argparse.REMAINDER,
                        help="worker command (prefix with -- to separate)")
    args = parser.parse_args(argv)
    command = [a for a in args.worker if a != "--"]
    if not command:
        parser.error("no worker command given")
    report = conformance(command, args.stage, args.timeout)
    print(json.dumps(report, indent=2))
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())

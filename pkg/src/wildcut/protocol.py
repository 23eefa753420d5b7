"""Line-delimited JSON worker protocol over child-process stdio.

Engine side of the wire contract: UTF-8 JSON objects, one per line, LF
terminated. The worker announces itself with a hello, then answers request
lines with response or error lines correlated by id; responses may arrive
out of order. The engine pings periodically and restarts a worker that
misses two pongs, times out, or exits.
"""

from __future__ import annotations

import json
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass, field

PROTOCOL_VERSION = 1
STAGES = ("separate", "diarize", "vad", "asr", "quality")
HANDSHAKE_TIMEOUT_S = 30.0
STDERR_TAIL_LINES = 20


class BackendUnavailable(Exception):
    """Worker could not be spawned or refused the handshake; fatal for a run."""


class StageError(Exception):
    """One request failed after retries; the affected source fails, run continues."""


class _WorkerRestarted(Exception):
    """Internal: the worker died or was restarted while a request was in flight."""


@dataclass(frozen=True)
class BackendDescriptor:
    stage: str
    kind: str = "mock"  # mock | reference | worker
    command: tuple[str, ...] = ()
    concurrency_slots: int = 1
    request_timeout_s: float = 300.0
    max_retries: int = 2
    batch_size: int = 16
    ping_interval_s: float = 60.0
    options: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.kind not in ("mock", "reference", "worker"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "worker" and not self.command:
            raise ValueError("worker backend requires a command")
        if self.concurrency_slots < 1:
            raise ValueError("concurrency_slots must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.request_timeout_s <= 0:
            raise ValueError("request_timeout_s must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class _Pending:
    __slots__ = ("event", "result", "error")

    def __init__(self):
        self.event = threading.Event()
        self.result = None
        self.error: Exception | None = None


class WorkerClient:
    """Owns one child process speaking the protocol; safe for concurrent use.

    At most ``concurrency_slots`` requests are outstanding at a time;
    extra submitters block. A single reader thread demultiplexes responses
    by id.
    """

    def __init__(self, desc: BackendDescriptor, handshake_timeout_s: float = HANDSHAKE_TIMEOUT_S):
        desc.validate()
        if desc.kind != "worker":
            raise ValueError("WorkerClient requires a worker-kind descriptor")
        self.desc = desc
        self._handshake_timeout_s = handshake_timeout_s
        self._proc: subprocess.Popen | None = None
        self._write_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._pending: dict[int, _Pending] = {}
        self._next_id = 0
        self._slots = threading.BoundedSemaphore(desc.concurrency_slots)
        self._stderr_tail: deque[str] = deque(maxlen=STDERR_TAIL_LINES)
        self._closed = False
        self._generation = 0
        self._missed_pongs = 0
        self._pong_seen = threading.Event()
        self._restart_lock = threading.Lock()
        self._start()
        self._ping_thread = threading.Thread(target=self._ping_loop, daemon=True)
        self._ping_thread.start()

    # -- lifecycle -------------------------------------------------------

    def _start(self) -> None:
        try:
            self._proc = subprocess.Popen(
                list(self.desc.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot spawn {self.desc.command}: {exc}") from exc
        threading.Thread(target=self._drain_stderr, args=(self._proc,), daemon=True).start()
        hello = self._await_hello()
        if hello.get("stage") != self.desc.stage:
            self._kill()
            raise BackendUnavailable(
                f"stage mismatch: worker announced {hello.get('stage')!r}, "
                f"descriptor expects {self.desc.stage!r}"
            )
        if hello.get("version") != PROTOCOL_VERSION:
            self._kill()
            raise BackendUnavailable(
                f"protocol version mismatch: worker speaks {hello.get('version')!r}"
            )
        self._reader = threading.Thread(
            target=self._read_loop, args=(self._proc, self._generation), daemon=True
        )
        self._reader.start()

    def _await_hello(self) -> dict:
        proc = self._proc
        box: dict = {}
        done = threading.Event()

        def read_one():
            line = proc.stdout.readline()
            if line:
                try:
                    box.update(json.loads(line))
                except json.JSONDecodeError:
                    box["_garbage"] = line.strip()
            done.set()

        t = threading.Thread(target=read_one, daemon=True)
        t.start()
        if not done.wait(self._handshake_timeout_s):
            self._kill()
            raise BackendUnavailable(
                f"handshake timeout after {self._handshake_timeout_s:.0f}s"
                f"{self._stderr_suffix()}"
            )
        if not box or box.get("type") != "hello":
            self._kill()
            raise BackendUnavailable(
                f"worker did not say hello (got {box or 'EOF'}){self._stderr_suffix()}"
            )
        return box

    def _drain_stderr(self, proc: subprocess.Popen) -> None:
        try:
            for line in proc.stderr:
                self._stderr_tail.append(line.rstrip("\n"))
        except ValueError:
            pass

    def _stderr_suffix(self) -> str:
        tail = "\n".join(self._stderr_tail)
        return f"; worker stderr:\n{tail}" if tail else ""

    def _kill(self) -> None:
        proc = self._proc
        if proc is None:
            return
        try:
            proc.kill()
            proc.wait(timeout=5)
        except OSError:
            pass

    def restart(self) -> None:
        """Kill the child and spawn a fresh one; in-flight requests get retried."""
        with self._restart_lock:
            with self._state_lock:
                if self._closed:
                    return
                self._generation += 1
                self._kill()
                stale = list(self._pending.values())
                self._pending.clear()
                self._missed_pongs = 0
            for pending in stale:
                pending.error = _WorkerRestarted()
                pending.event.set()
            self._start()

    def close(self) -> None:
        with self._state_lock:
            self._closed = True
        self._kill()

    # -- I/O -------------------------------------------------------------

    def _read_loop(self, proc: subprocess.Popen, generation: int) -> None:
        for line in proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                continue
            kind = msg.get("type")
            if kind == "pong":
                self._missed_pongs = 0
                self._pong_seen.set()
                continue
            if kind in ("response", "error"):
                with self._state_lock:
                    pending = self._pending.pop(msg.get("id"), None)
                if pending is None:
                    continue
                if kind == "response":
                    pending.result = msg.get("payload")
                else:
                    pending.error = StageError(str(msg.get("message", "worker error")))
                pending.event.set()
        # EOF: the worker died; anyone still waiting gets a restart signal.
        with self._state_lock:
            if self._closed or generation != self._generation:
                return
            stale = list(self._pending.values())
            self._pending.clear()
        for pending in stale:
            pending.error = _WorkerRestarted()
            pending.event.set()

    def _send(self, obj: dict) -> None:
        data = json.dumps(obj, ensure_ascii=False) + "\n"
        with self._write_lock:
            proc = self._proc
            if proc is None or proc.stdin is None:
                raise _WorkerRestarted()
            try:
                proc.stdin.write(data)
                proc.stdin.flush()
            except (BrokenPipeError, OSError, ValueError) as exc:
                raise _WorkerRestarted() from exc

    def _ping_loop(self) -> None:
        while True:
            time.sleep(self.desc.ping_interval_s)
            with self._state_lock:
                if self._closed:
                    return
            try:
                self._send({"type": "ping"})
            except _WorkerRestarted:
                continue
            self._missed_pongs += 1
            if self._missed_pongs >= 2:
                try:
                    self.restart()
                except BackendUnavailable:
                    return

    def request(self, payload, timeout_s: float | None = None):
        """Send one request and wait for its correlated terminal outcome.

        Timeouts and worker crashes are retried up to max_retries times with
        a worker restart in between; a worker-reported error is final.
        """
        timeout_s = timeout_s if timeout_s is not None else self.desc.request_timeout_s
        attempts = self.desc.max_retries + 1
        with self._slots:
            last: Exception | None = None
            for _ in range(attempts):
                with self._state_lock:
                    if self._closed:
                        raise StageError("worker client is closed")
                    request_id = self._next_id
                    self._next_id += 1
                    pending = _Pending()
                    self._pending[request_id] = pending
                try:
                    self._send({"type": "request", "id": request_id, "payload": payload})
                except _WorkerRestarted as exc:
                    last = exc
                    with self._state_lock:
                        self._pending.pop(request_id, None)
                    self._safe_restart()
                    continue
                if not pending.event.wait(timeout_s):
                    with self._state_lock:
                        self._pending.pop(request_id, None)
                    last = StageError(f"request timed out after {timeout_s:.1f}s")
                    self._safe_restart()
                    continue
                if pending.error is None:
                    return pending.result
                if isinstance(pending.error, _WorkerRestarted):
                    last = pending.error
                    continue
                raise pending.error
            if isinstance(last, _WorkerRestarted):
                raise StageError("worker kept dying before answering")
            raise last if last is not None else StageError("request failed")

    def _safe_restart(self) -> None:
        try:
            self.restart()
        except BackendUnavailable as exc:
            raise StageError(f"worker restart failed: {exc}") from exc


def spawn_worker(desc: BackendDescriptor) -> WorkerClient:
    """Start a worker process and complete the hello handshake."""
    return WorkerClient(desc)

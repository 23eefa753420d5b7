#!/usr/bin/env python3
"""Configurable stub worker for protocol tests.

Speaks protocol version 1 over stdio. Behaviors simulate the failure modes
the engine must survive: slow answers, crashes, dropped responses, silence
to pings, bad handshakes, out-of-order replies.
"""

import argparse
import json
import os
import sys
import time


def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--stage", default="asr")
    parser.add_argument(
        "--behavior",
        default="echo",
        choices=["echo", "drop-third", "no-pong", "wrong-stage", "exit-early",
                 "bad-version", "out-of-order", "slow-hello"],
    )
    args = parser.parse_args()

    if args.behavior == "exit-early":
        print("boom: refusing to start", file=sys.stderr)
        sys.exit(3)
    if args.behavior == "slow-hello":
        time.sleep(5.0)

    stage = "separate" if args.behavior == "wrong-stage" and args.stage != "separate" else args.stage
    version = 99 if args.behavior == "bad-version" else 1
    emit({"type": "hello", "stage": stage, "version": version})

    counter = 0
    holdback = None
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        if msg.get("type") == "ping":
            if args.behavior != "no-pong":
                emit({"type": "pong"})
            continue
        if msg.get("type") != "request":
            continue
        counter += 1
        payload = msg.get("payload")
        if isinstance(payload, dict):
            op = payload.get("op")
            if op == "sleep":
                time.sleep(float(payload.get("seconds", 1.0)))
            elif op == "die":
                os._exit(9)
            elif op == "error":
                emit({"type": "error", "id": msg["id"], "message": payload.get("message", "bad")})
                continue
            elif op == "pid":
                emit({"type": "response", "id": msg["id"], "payload": {"pid": os.getpid()}})
                continue
        if args.behavior == "drop-third" and counter % 3 == 0:
            continue
        if args.behavior == "out-of-order":
            if holdback is None:
                holdback = msg
                continue
            emit({"type": "response", "id": msg["id"], "payload": payload})
            emit({"type": "response", "id": holdback["id"], "payload": holdback.get("payload")})
            holdback = None
            continue
        emit({"type": "response", "id": msg["id"], "payload": payload})


if __name__ == "__main__":
    main()

"""Serve an in-process backend over the wire protocol, for tests and demos.

Usage: python -m seqleak.mock_bridge --model table:PATH [--name NAME]

Speaks line-delimited JSON on stdio: answers the hello handshake, then
maps each next request to normalized log-probabilities (softmax of the
backend's logits).  Emitted arrays are always finite; exact zeros are
clamped to a large negative log so the JSON stays standard, which still
round-trips to probability 0.0 through exp.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .distributions import LOG_ZERO, softmax
from .models import load_model

PROTOCOL_VERSION = 1
FINITE_LOG_ZERO = -1e9  # exp() underflows to exactly 0.0


def serve_stream(model, rfile, wfile, name: str = "mock") -> None:
    """Answer protocol messages on a line stream until EOF."""

    def reply(obj) -> None:
        wfile.write(json.dumps(obj) + "\n")
        wfile.flush()

    def err(rid, msg: str) -> None:
        obj = {"op": "err", "msg": msg}
        if rid is not None:
            obj["id"] = rid
        reply(obj)

    for line in rfile:
        if not line.strip():
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            err(None, f"malformed message at byte {e.pos}: {e.msg}")
            continue
        rid = msg.get("id") if isinstance(msg, dict) else None
        if not isinstance(msg, dict) or "op" not in msg:
            err(rid, "message must be an object with an 'op' field")
            continue
        op = msg["op"]
        if op == "hello":
            if msg.get("version") != PROTOCOL_VERSION:
                err(rid, f"unsupported protocol version {msg.get('version')!r}")
                continue
            reply({"op": "hello", "version": PROTOCOL_VERSION,
                   "vocab_size": model.vocab_size, "name": name})
        elif op == "next":
            ctx = msg.get("context")
            if not isinstance(rid, int):
                err(None, "next requires an integer id")
                continue
            if not isinstance(ctx, list) or not ctx:
                err(rid, "context must be a non-empty array of token ids")
                continue
            if any(not isinstance(t, int) or not (0 <= t < model.vocab_size) for t in ctx):
                err(rid, f"context token outside vocab of size {model.vocab_size}")
                continue
            lp = softmax(model.logits(ctx)).logprobs
            lp = np.where(lp == LOG_ZERO, FINITE_LOG_ZERO, lp)
            reply({"op": "dist", "id": rid, "logprobs": [float(v) for v in lp]})
        else:
            err(rid, f"unknown op {op!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="seqleak-mock-bridge", description=__doc__)
    parser.add_argument("--model", required=True,
                        help="table:PATH or ngram:PATH,ORDER[,ALPHA]")
    parser.add_argument("--name", default="mock")
    args = parser.parse_args(argv)
    model = load_model(args.model)
    serve_stream(model, sys.stdin, sys.stdout, name=args.name)
    return 0


if __name__ == "__main__":
    sys.exit(main())

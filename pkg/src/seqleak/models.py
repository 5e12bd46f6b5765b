"""Model backends: anything that maps a context to a logit vector.

Three concrete backends cover the scales we care about:

* ``TableModel`` - explicit context -> distribution lookup, loaded from JSON.
  Small, exact, and the workhorse for tests.
* ``NGramModel`` - add-alpha n-gram estimates counted from a token-id corpus.
* ``RemoteModel`` - line-delimited JSON client for out-of-process models.

All backends return *logits*: any vector whose softmax is the intended
distribution.  Table and n-gram backends emit log-probabilities directly
(softmax is idempotent on those), with exact zeros mapped to ``-inf``.
"""

from __future__ import annotations

import json
import socket
import subprocess
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from .distributions import LOG_ZERO

__all__ = [
    "Model",
    "TableModel",
    "NGramModel",
    "RemoteModel",
    "CachedModel",
    "BridgeError",
    "next_distribution",
    "train_ngram",
    "load_model",
]


class Model(Protocol):
    """Minimal surface every backend provides."""

    vocab_size: int

    def logits(self, context: Sequence[int]) -> np.ndarray:
        """Logit vector of length ``vocab_size`` for the next token after ``context``."""
        ...


def next_distribution(model: Model, context: Sequence[int]) -> np.ndarray:
    """Raw logits for the next token; deterministic per context for a fixed model."""
    return model.logits(context)


def _log_of_probs(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = np.log(probs)
    out[probs == 0.0] = LOG_ZERO
    return out


class TableModel:
    """Next-token distributions looked up from an explicit table.

    File format (JSON)::

        {"vocab_size": V,
         "default": [V probs],
         "entries": [{"context": [ids], "probs": [V probs]}, ...]}

    Contexts not listed fall back to ``default``.  Probabilities may contain
    exact zeros; the emitted logits carry ``-inf`` there so downstream
    probabilities stay exactly zero.
    """

    def __init__(self, vocab_size: int, default: Sequence[float],
                 entries: dict[tuple[int, ...], Sequence[float]] | None = None):
        self.vocab_size = int(vocab_size)
        self._default = self._check_row(default)
        self._table: dict[tuple[int, ...], np.ndarray] = {}
        for ctx, probs in (entries or {}).items():
            self._table[tuple(int(t) for t in ctx)] = self._check_row(probs)

    def _check_row(self, probs) -> np.ndarray:
        row = np.asarray(probs, dtype=np.float64)
        if row.shape != (self.vocab_size,):
            raise ValueError(f"expected {self.vocab_size} probabilities, got shape {row.shape}")
        if np.any(row < 0) or abs(float(row.sum()) - 1.0) > 1e-9:
            raise ValueError("table row is not a probability distribution")
        row = _log_of_probs(row)
        row.flags.writeable = False
        return row

    @classmethod
    def load(cls, path) -> "TableModel":
        with open(path) as fh:
            raw = json.load(fh)
        entries = {tuple(e["context"]): e["probs"] for e in raw.get("entries", [])}
        return cls(raw["vocab_size"], raw["default"], entries)

    def save(self, path) -> None:
        entries = [
            {"context": list(ctx), "probs": np.exp(row).tolist()}
            for ctx, row in sorted(self._table.items())
        ]
        doc = {
            "vocab_size": self.vocab_size,
            "default": np.exp(self._default).tolist(),
            "entries": entries,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    def set_context(self, context: Sequence[int], probs) -> None:
        self._table[tuple(int(t) for t in context)] = self._check_row(probs)

    def logits(self, context: Sequence[int]) -> np.ndarray:
        return self._table.get(tuple(int(t) for t in context), self._default)


class NGramModel:
    """Add-alpha smoothed n-gram estimates over a token-id corpus.

    An order-k model conditions on the previous k-1 tokens; order 1 is the
    unigram (empty context).  Conditionals are (count + alpha) / (total +
    alpha*V).  A context never seen in the corpus has all-zero counts, so
    with alpha > 0 it smooths to uniform; with alpha = 0 it falls back to
    uniform outright rather than dividing by zero.
    """

    def __init__(self, vocab_size: int, order: int, alpha: float = 1.0):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        self.vocab_size = int(vocab_size)
        self.order = int(order)
        self.alpha = float(alpha)
        self._counts: dict[tuple[int, ...], np.ndarray] = {}

    def fit(self, corpus: Sequence[int]) -> "NGramModel":
        toks = [int(t) for t in corpus]
        if len(toks) < self.order:
            raise ValueError(f"corpus of {len(toks)} tokens is shorter than order {self.order}")
        w = self.order - 1
        for i in range(w, len(toks)):
            ctx = tuple(toks[i - w: i])
            row = self._counts.get(ctx)
            if row is None:
                row = self._counts.setdefault(ctx, np.zeros(self.vocab_size))
            row[toks[i]] += 1
        return self

    @classmethod
    def load(cls, path, order: int, alpha: float, vocab_size: int | None = None) -> "NGramModel":
        """Fit from a whitespace-separated token-id file."""
        with open(path) as fh:
            toks = [int(t) for t in fh.read().split()]
        if vocab_size is None:
            vocab_size = max(toks) + 1 if toks else 1
        return cls(vocab_size, order, alpha).fit(toks)

    def logits(self, context: Sequence[int]) -> np.ndarray:
        w = self.order - 1
        ctx = tuple(int(t) for t in context[-w:]) if w else ()
        counts = self._counts.get(ctx)
        V = self.vocab_size
        if counts is None and self.alpha == 0.0:
            return np.full(V, -np.log(V))
        row = np.full(V, self.alpha) if counts is None else counts + self.alpha
        total = float(row.sum())
        if total == 0.0:  # alpha=0 with an empty row; only reachable via hand-built counts
            return np.full(V, -np.log(V))
        return _log_of_probs(row / total)


def train_ngram(corpus: Sequence[int], order: int, alpha: float,
                vocab_size: int | None = None) -> NGramModel:
    """Count sliding windows of ``corpus`` into a smoothed n-gram backend."""
    toks = [int(t) for t in corpus]
    if not toks:
        raise ValueError("empty corpus")
    if vocab_size is None:
        vocab_size = max(toks) + 1
    return NGramModel(vocab_size, order, alpha).fit(toks)


class BridgeError(RuntimeError):
    """Transport or protocol failure talking to an external model process."""


class RemoteModel:
    """Client for the line-delimited JSON model protocol.

    The peer speaks newline-separated JSON objects.  Handshake::

        -> {"op": "hello", "version": 1}
        <- {"op": "hello", "version": 1, "vocab_size": V, "name": "..."}

    then any number of::

        -> {"op": "next", "id": N, "context": [ids]}
        <- {"op": "dist", "id": N, "logprobs": [V floats]}

    Requests may be pipelined; replies can arrive in completion order and
    are matched by id.  An ``{"op": "err", "id": N, "msg": "..."}`` reply
    raises ``BridgeError``.  Endpoints: ``cmd:SHELL-COMMAND`` (stdio
    subprocess) or ``tcp:HOST:PORT``.
    """

    PROTOCOL_VERSION = 1

    def __init__(self, endpoint: str, *, timeout: float = 30.0):
        self.endpoint = endpoint
        self._next_id = 0
        self._pending: dict[int, np.ndarray] = {}
        self._proc = None
        self._sock = None
        if endpoint.startswith("cmd:"):
            self._proc = subprocess.Popen(
                endpoint[4:], shell=True, text=True, bufsize=1,
                stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            )
            self._send = self._send_proc
            self._recv_line = self._recv_proc
        elif endpoint.startswith("tcp:"):
            host, _, port = endpoint[4:].rpartition(":")
            self._sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
            self._rfile = self._sock.makefile("r", encoding="utf-8", newline="\n")
            self._send = self._send_sock
            self._recv_line = self._recv_sock
        else:
            raise ValueError(f"unknown bridge endpoint {endpoint!r} (expected cmd:... or tcp:...)")
        self._send({"op": "hello", "version": self.PROTOCOL_VERSION})
        hello = self._parse(self._recv_line())
        if hello.get("op") != "hello" or hello.get("version") != self.PROTOCOL_VERSION:
            raise BridgeError(f"bad handshake reply: {hello!r}")
        self.vocab_size = int(hello["vocab_size"])
        self.name = str(hello.get("name", ""))

    # -- transport plumbing ------------------------------------------------

    def _send_proc(self, obj) -> None:
        if self._proc.poll() is not None:
            raise BridgeError("bridge process exited")
        self._proc.stdin.write(json.dumps(obj) + "\n")
        self._proc.stdin.flush()

    def _recv_proc(self) -> str:
        line = self._proc.stdout.readline()
        if not line:
            raise BridgeError("bridge process closed its output")
        return line

    def _send_sock(self, obj) -> None:
        self._sock.sendall((json.dumps(obj) + "\n").encode("utf-8"))

    def _recv_sock(self) -> str:
        line = self._rfile.readline()
        if not line:
            raise BridgeError("bridge connection closed")
        return line

    @staticmethod
    def _parse(line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            raise BridgeError(f"malformed bridge message at byte {e.pos}: {e.msg}") from e
        if not isinstance(msg, dict):
            raise BridgeError(f"bridge message is not an object: {line.strip()!r}")
        return msg

    # -- protocol ----------------------------------------------------------

    def _read_reply(self) -> tuple[int, np.ndarray]:
        msg = self._parse(self._recv_line())
        op = msg.get("op")
        if op == "err":
            raise BridgeError(f"bridge error for id {msg.get('id')}: {msg.get('msg')}")
        if op != "dist":
            raise BridgeError(f"unexpected bridge message: {msg!r}")
        lp = np.asarray(msg["logprobs"], dtype=np.float64)
        if lp.shape != (self.vocab_size,):
            raise BridgeError(
                f"logprobs length {lp.shape[0] if lp.ndim == 1 else lp.shape} "
                f"does not match handshake vocab_size {self.vocab_size}"
            )
        return int(msg["id"]), lp

    def request(self, context: Sequence[int]) -> int:
        """Send one pipelined request; returns the id to collect with."""
        rid = self._next_id
        self._next_id += 1
        self._send({"op": "next", "id": rid, "context": [int(t) for t in context]})
        return rid

    def collect(self, rid: int) -> np.ndarray:
        """Block until the reply for ``rid`` arrives (replies may interleave)."""
        while rid not in self._pending:
            got, lp = self._read_reply()
            self._pending[got] = lp
        return self._pending.pop(rid)

    def logits(self, context: Sequence[int]) -> np.ndarray:
        return self.collect(self.request(context))

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.wait(timeout=5)
            self._proc = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class CachedModel:
    """Memoizing wrapper: repeated contexts hit an LRU cache, not the backend.

    Enumeration revisits the same contexts constantly (every branch of the
    search shares prefixes), so this sits between the scorer and any
    nontrivial backend.  Remote models in particular must be wrapped so one
    run sees a consistent distribution per context.  Returned arrays are
    read-only.
    """

    def __init__(self, model: Model, maxsize: int = 65536):
        self.model = model
        self.vocab_size = model.vocab_size

        @lru_cache(maxsize=maxsize)
        def _logits(ctx: tuple[int, ...]) -> np.ndarray:
            out = np.asarray(self.model.logits(ctx), dtype=np.float64).copy()
            out.flags.writeable = False
            return out

        self._logits = _logits

    def logits(self, context: Sequence[int]) -> np.ndarray:
        return self._logits(tuple(int(t) for t in context))

    def cache_info(self):
        return self._logits.cache_info()


def load_model(spec: str):
    """Build a backend from a CLI-style spec.

    * ``table:PATH`` - JSON lookup table
    * ``ngram:PATH,ORDER[,ALPHA]`` - n-gram fit on a token-id file
    * ``bridge:ENDPOINT`` - external process (``cmd:...`` or ``tcp:HOST:PORT``)
    """
    kind, _, rest = spec.partition(":")
    if not rest:
        raise ValueError(f"model spec {spec!r} is missing an argument")
    if kind == "table":
        return TableModel.load(rest)
    if kind == "ngram":
        parts = rest.split(",")
        if len(parts) < 2:
            raise ValueError("ngram spec needs at least PATH,ORDER")
        path, order = parts[0], int(parts[1])
        alpha = float(parts[2]) if len(parts) > 2 else 1.0
        return NGramModel.load(path, order, alpha)
    if kind == "bridge":
        return RemoteModel(rest)
    raise ValueError(f"unknown model kind {kind!r} (expected table, ngram or bridge)")

"""Transforms from model logits to the effective sampling distribution.

A model's raw logit vector is first normalized (softmax, optionally with a
temperature) and then passed through a decoding transform (greedy, top-k,
top-p, or plain sampling).  The result of the composition is the *effective
distribution* the generation process actually samples from.

All distributions are kept in log space.  A token removed by a truncating
decoder has probability exactly zero, represented by the distinguished
``LOG_ZERO`` value (``-inf``), never by a large negative float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_ZERO = -math.inf

__all__ = [
    "LOG_ZERO",
    "ProbDist",
    "NormalizationSpec",
    "DecodingSpec",
    "softmax",
    "softmax_temperature",
    "apply_greedy",
    "apply_top_k",
    "apply_top_p",
    "effective_distribution",
    "descending_support_order",
]


def _as_logits(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("logits must be a non-empty 1-d array")
    if np.any(np.isnan(arr)) or np.any(arr == np.inf):
        raise ValueError("logits must not contain NaN or +inf")
    return arr


def _logsumexp(logvals: np.ndarray) -> float:
    m = float(np.max(logvals))
    if m == LOG_ZERO:
        return LOG_ZERO
    return m + math.log(float(np.sum(np.exp(logvals - m))))


@dataclass(frozen=True, eq=False)
class ProbDist:
    """A finite probability distribution over token indices ``0..V-1``.

    ``logprobs[i]`` is the natural log of token ``i``'s probability;
    entries equal to ``LOG_ZERO`` are exact zeros (outside the support).
    """

    logprobs: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.logprobs, dtype=np.float64)
        if lp.ndim != 1 or lp.size == 0:
            raise ValueError("logprobs must be a non-empty 1-d array")
        if np.any(np.isnan(lp)) or np.any(lp == np.inf):
            raise ValueError("logprobs must not contain NaN or +inf")
        total = float(np.sum(np.exp(lp[lp > LOG_ZERO]))) if np.any(lp > LOG_ZERO) else 0.0
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within 1e-9")
        lp.flags.writeable = False
        object.__setattr__(self, "logprobs", lp)

    @classmethod
    def from_probs(cls, probs) -> "ProbDist":
        p = np.asarray(probs, dtype=np.float64)
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        with np.errstate(divide="ignore"):
            return cls(np.log(p))

    @property
    def vocab_size(self) -> int:
        return int(self.logprobs.shape[0])

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.logprobs)

    @property
    def support(self) -> np.ndarray:
        """Indices with nonzero probability, ascending."""
        return np.flatnonzero(self.logprobs > LOG_ZERO)

    def prob(self, token: int) -> float:
        return float(math.exp(self.logprobs[token])) if self.logprobs[token] > LOG_ZERO else 0.0

    def logprob(self, token: int) -> float:
        return float(self.logprobs[token])


def descending_support_order(dist: ProbDist) -> np.ndarray:
    """Support indices sorted by decreasing probability, ties by lowest index."""
    order = np.argsort(-dist.logprobs, kind="stable")
    return order[: dist.support.size]


def softmax(logits) -> ProbDist:
    """Max-shifted softmax; safe against overflow for any finite logits."""
    z = _as_logits(logits)
    m = float(np.max(z))
    if m == LOG_ZERO:
        raise ValueError("softmax undefined: all logits are log-zero")
    shifted = z - m
    return ProbDist(shifted - math.log(float(np.sum(np.exp(shifted)))))


def softmax_temperature(logits, temperature: float) -> ProbDist:
    """Softmax of ``logits / temperature``; sharper for T < 1, flatter for T > 1."""
    if not (temperature > 0) or not math.isfinite(temperature):
        raise ValueError(f"temperature must be a positive finite real, got {temperature!r}")
    z = _as_logits(logits)
    return softmax(z / temperature)


def apply_greedy(dist: ProbDist) -> ProbDist:
    """One-hot at the highest-probability index; ties broken by lowest index."""
    top = int(np.argmax(dist.logprobs))
    lp = np.full(dist.vocab_size, LOG_ZERO)
    lp[top] = 0.0
    return ProbDist(lp)


def _renormalize(dist: ProbDist, keep: np.ndarray) -> ProbDist:
    lp = np.full(dist.vocab_size, LOG_ZERO)
    kept = dist.logprobs[keep]
    lp[keep] = kept - _logsumexp(kept)
    return ProbDist(lp)


def apply_top_k(dist: ProbDist, k: int) -> ProbDist:
    """Keep the k highest-probability tokens and renormalize.

    Boundary ties are broken by lowest token index.  ``k`` at or above the
    support size returns the distribution unchanged.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    order = descending_support_order(dist)
    if k >= order.size:
        return dist
    return _renormalize(dist, order[:k])


def apply_top_p(dist: ProbDist, p: float, *, strict: bool = False) -> ProbDist:
    """Nucleus truncation: keep the smallest head of the distribution covering p.

    The head is taken in decreasing-probability order (ties by lowest index)
    and includes the token that crosses the threshold, so the kept mass is
    always >= p.  With ``strict=True`` the head instead keeps only tokens
    whose cumulative mass stays <= p (but never fewer than one token).
    ``p=1`` returns the distribution unchanged.
    """
    if not (0 < p <= 1):
        raise ValueError(f"p must be in (0, 1], got {p!r}")
    if p == 1.0 and not strict:
        return dist
    order = descending_support_order(dist)
    cum = np.cumsum(np.exp(dist.logprobs[order]))
    if strict:
        count = int(np.searchsorted(cum, p, side="right"))
        count = max(count, 1)
    else:
        count = int(np.searchsorted(cum, p, side="left")) + 1
    count = min(count, order.size)
    if count == order.size:
        return dist
    return _renormalize(dist, order[:count])


@dataclass(frozen=True)
class NormalizationSpec:
    """Which logit normalization to apply: plain softmax or softmax with temperature."""

    kind: str = "softmax"  # "softmax" | "temperature"
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in ("softmax", "temperature"):
            raise ValueError(f"unknown normalization kind {self.kind!r}")
        if not (self.temperature > 0) or not math.isfinite(self.temperature):
            raise ValueError(f"temperature must be positive and finite, got {self.temperature!r}")

    @classmethod
    def parse(cls, text: str) -> "NormalizationSpec":
        """Parse a CLI-style spec: ``softmax`` or ``temp:K``."""
        if text == "softmax":
            return cls()
        if text.startswith("temp:"):
            return cls("temperature", float(text.split(":", 1)[1]))
        raise ValueError(f"unknown normalization spec {text!r} (expected 'softmax' or 'temp:K')")

    def apply(self, logits) -> ProbDist:
        if self.kind == "softmax":
            return softmax(logits)
        return softmax_temperature(logits, self.temperature)

    def label(self) -> str:
        return "softmax" if self.kind == "softmax" else f"temp={self.temperature:g}"


@dataclass(frozen=True)
class DecodingSpec:
    """Which decoding transform shapes the normalized distribution before sampling."""

    kind: str = "sample"  # "greedy" | "sample" | "top_k" | "top_p"
    k: int | None = None
    p: float | None = None
    top_p_strict: bool = False  # keep-below-threshold nucleus variant

    def __post_init__(self):
        if self.kind not in ("greedy", "sample", "top_k", "top_p"):
            raise ValueError(f"unknown decoding kind {self.kind!r}")
        if self.kind == "top_k":
            if self.k is None or int(self.k) < 1:
                raise ValueError(f"top_k requires k >= 1, got {self.k!r}")
        if self.kind == "top_p":
            if self.p is None or not (0 < self.p <= 1):
                raise ValueError(f"top_p requires p in (0, 1], got {self.p!r}")

    @classmethod
    def greedy(cls) -> "DecodingSpec":
        return cls("greedy")

    @classmethod
    def sample(cls) -> "DecodingSpec":
        return cls("sample")

    @classmethod
    def top_k(cls, k: int) -> "DecodingSpec":
        return cls("top_k", k=k)

    @classmethod
    def top_p(cls, p: float, *, strict: bool = False) -> "DecodingSpec":
        return cls("top_p", p=p, top_p_strict=strict)

    @classmethod
    def parse(cls, text: str) -> "DecodingSpec":
        """Parse a CLI-style spec: ``greedy``, ``sample``, ``topk:K`` or ``topp:P``."""
        if text == "greedy":
            return cls.greedy()
        if text == "sample":
            return cls.sample()
        if text.startswith("topk:"):
            return cls.top_k(int(text.split(":", 1)[1]))
        if text.startswith("topp:"):
            return cls.top_p(float(text.split(":", 1)[1]))
        raise ValueError(
            f"unknown decoding spec {text!r} (expected 'greedy', 'sample', 'topk:K' or 'topp:P')"
        )

    def apply(self, dist: ProbDist) -> ProbDist:
        if self.kind == "greedy":
            return apply_greedy(dist)
        if self.kind == "sample":
            return dist
        if self.kind == "top_k":
            return apply_top_k(dist, int(self.k))
        return apply_top_p(dist, float(self.p), strict=self.top_p_strict)

    def label(self) -> str:
        if self.kind == "top_k":
            return f"topk={self.k}"
        if self.kind == "top_p":
            base = f"topp={self.p:g}"
            return base + "-strict" if self.top_p_strict else base
        return self.kind


def effective_distribution(logits, norm: NormalizationSpec, decode: DecodingSpec) -> ProbDist:
    """Normalize then decode-transform: the distribution generation samples from."""
    return decode.apply(norm.apply(logits))

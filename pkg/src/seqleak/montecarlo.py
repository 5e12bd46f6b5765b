"""Empirical cross-check: simulate generation and count what actually leaks.

Every closed-form probability in this package claims to describe the same
event frequency a generation loop would produce.  This module runs that
loop.  Rollouts draw from the effective distribution token by token; a
record's N trials share one counter-based RNG stream keyed by (seed,
record id), with trial t consuming draws t*m..t*m+m-1, so results are
reproducible regardless of execution order or chunking.

The batch estimators classify each rollout by how many positions differ
from the true suffix, so one set of rollouts serves both the verbatim
frequency (0 mismatches) and any exact-n frequency.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import DecodingSpec, NormalizationSpec
from .metrics import Scorer, SequenceRecord
from .models import Model

__all__ = [
    "SamplerConfig",
    "FreqEstimate",
    "record_rng",
    "sample_suffix",
    "rollout_mismatch_hist",
    "estimate_leak_freq",
    "estimate_partial_freq",
]


@dataclass(frozen=True)
class SamplerConfig:
    """How many rollouts to run and under which root seed."""

    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class FreqEstimate:
    """Hit count over N trials with the binomial standard error."""

    hits: int
    trials: int

    @property
    def freq(self) -> float:
        return self.hits / self.trials

    @property
    def stderr(self) -> float:
        f = self.freq
        return math.sqrt(f * (1.0 - f) / self.trials)

    def within(self, target: float, sigmas: float = 4.0) -> bool:
        """Is the observation consistent with ``target`` at the given band?

        The band uses the larger of the empirical stderr and the one the
        target itself implies; with zero hits the empirical stderr is 0 and
        would spuriously reject any nonzero target, however tiny.
        """
        band = max(self.stderr, math.sqrt(target * (1.0 - target) / self.trials))
        return abs(self.freq - target) <= sigmas * band


def record_rng(seed: int, record_id: str) -> np.random.Generator:
    """Counter-based generator for one record's trial stream.

    The record id is folded in through a stable hash (not Python's
    randomized one) so per-record streams are independent and identical
    across processes.
    """
    digest = hashlib.sha256(record_id.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), key))))


def _draw(dist_cum: np.ndarray, u) -> np.ndarray:
    """Inverse-CDF draw: uniform u in [0,1) to a token index.

    Zero-probability tokens occupy zero-width CDF intervals and can never
    be selected.
    """
    toks = np.searchsorted(dist_cum, u, side="right")
    return np.minimum(toks, dist_cum.size - 1)


def sample_suffix(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                  prefix: Sequence[int], m: int, rng: np.random.Generator) -> list[int]:
    """One rollout: m tokens drawn autoregressively from the effective distribution."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    scorer = Scorer(model, norm, decode)
    ctx = tuple(int(t) for t in prefix)
    out = []
    for _ in range(m):
        cum = np.cumsum(scorer.effective(ctx).probs)
        tok = int(_draw(cum, rng.random()))
        out.append(tok)
        ctx = ctx + (tok,)
    return out


def rollout_mismatch_hist(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                          record: SequenceRecord, cfg: SamplerConfig) -> np.ndarray:
    """Histogram over mismatch counts for N rollouts of the record's prefix.

    Entry k counts rollouts that differ from the true suffix in exactly k
    positions (length m+1).  Trials are vectorized by grouping rollouts
    that share a context, so cost scales with distinct contexts, not N.
    """
    scorer = Scorer(model, norm, decode)
    N, m = cfg.trials, record.m
    uniforms = record_rng(cfg.seed, record.id).random((N, m))
    contexts: list[tuple[int, ...]] = [record.prefix]
    intern: dict[tuple[int, ...], int] = {record.prefix: 0}
    ctx_ids = np.zeros(N, dtype=np.int64)
    mismatches = np.zeros(N, dtype=np.int64)
    for i in range(m):
        true_tok = record.suffix[i]
        next_ids = np.empty(N, dtype=np.int64)
        order = np.argsort(ctx_ids, kind="stable")
        sorted_ids = ctx_ids[order]
        bounds = np.searchsorted(sorted_ids, np.unique(sorted_ids))
        bounds = np.append(bounds, N)
        for g in range(bounds.size - 1):
            idx = order[bounds[g]: bounds[g + 1]]
            cid = int(ctx_ids[idx[0]])
            cum = np.cumsum(scorer.effective(contexts[cid]).probs)
            toks = _draw(cum, uniforms[idx, i])
            mismatches[idx] += toks != true_tok
            lut = np.empty(cum.size, dtype=np.int64)
            for t in np.unique(toks):
                new_ctx = contexts[cid] + (int(t),)
                nid = intern.get(new_ctx)
                if nid is None:
                    nid = len(contexts)
                    contexts.append(new_ctx)
                    intern[new_ctx] = nid
                lut[t] = nid
            next_ids[idx] = lut[toks]
        ctx_ids = next_ids
    return np.bincount(mismatches, minlength=m + 1)


def estimate_leak_freq(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                       record: SequenceRecord, cfg: SamplerConfig) -> FreqEstimate:
    """Observed frequency of emitting the suffix verbatim."""
    hist = rollout_mismatch_hist(model, norm, decode, record, cfg)
    return FreqEstimate(hits=int(hist[0]), trials=cfg.trials)


def estimate_partial_freq(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                          record: SequenceRecord, n: int, cfg: SamplerConfig) -> FreqEstimate:
    """Observed frequency of rollouts differing from the suffix in exactly n positions."""
    if not (0 <= n <= record.m):
        raise ValueError(f"n must be in [0, {record.m}], got {n}")
    hist = rollout_mismatch_hist(model, norm, decode, record, cfg)
    return FreqEstimate(hits=int(hist[n]), trials=cfg.trials)

"""Per-sequence leak probabilities: TP, ESP, and exact-n mismatch mass.

Given a model, a normalization, and a decoding transform, every quantity
here is a probability of an event under repeated generation from the
effective distribution:

* token probability (TP): one specific next token;
* exact sample probability (ESP): the entire target suffix, verbatim;
* n-ISP: any suffix of the same length differing from the target in
  exactly n positions (substitutions only).

n-ISP sums ESPs over a combinatorially large set, so besides a brute-force
reference there is a depth-first branch-and-bound enumeration that expands
only the heaviest mismatch branches and certifies what it skipped: the true
n-ISP is guaranteed to lie in [value, value + eps].  The eps charge treats
every skipped branch as if it would have completed the remaining positions
with probability 1, which is the worst case, so the bound holds for any
model.  Everything accumulates in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .distributions import (
    LOG_ZERO,
    DecodingSpec,
    NormalizationSpec,
    ProbDist,
    descending_support_order,
    effective_distribution,
)
from .models import CachedModel, Model

__all__ = [
    "SequenceRecord",
    "ApproxConfig",
    "ISPResult",
    "Scorer",
    "token_probability",
    "exact_sample_probability",
    "is_memorized_greedy",
    "n_isp_bruteforce",
    "n_isp_approx",
    "cumulative_isp",
    "pattern_label",
    "BRUTEFORCE_CAP",
]

# Mismatch patterns are tuples of 1-based suffix positions, sorted ascending.
MismatchPattern = tuple[int, ...]

# brute force refuses above this many candidate sequences (~16^5)
BRUTEFORCE_CAP = 1_048_576


def pattern_label(pattern: MismatchPattern) -> str:
    """Render a mismatch pattern the way result tables name it, e.g. ``(3,4)``."""
    return "(" + ",".join(str(p) for p in pattern) + ")"


@dataclass(frozen=True)
class SequenceRecord:
    """One scoring unit: a prefix that prompts and a suffix that may leak."""

    id: str
    prefix: tuple[int, ...]
    suffix: tuple[int, ...]
    tags: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(t) for t in self.prefix))
        object.__setattr__(self, "suffix", tuple(int(t) for t in self.suffix))
        if not self.prefix:
            raise ValueError(f"record {self.id!r}: empty prefix")
        if not self.suffix:
            raise ValueError(f"record {self.id!r}: empty suffix")

    @property
    def j(self) -> int:
        return len(self.prefix)

    @property
    def m(self) -> int:
        return len(self.suffix)


@dataclass(frozen=True)
class ApproxConfig:
    """Knobs for the branch-and-bound enumeration.

    At every branch point the non-matching tokens are considered in
    decreasing probability order; ``branch_width`` caps how many are
    expanded, ``head_mass`` expands until that fraction of the non-matching
    mass is covered (including the crossing token).  At least one must be
    set; when both are, the smaller resulting set wins.  ``max_expansions``
    bounds the number of model queries; on exhaustion the enumeration
    stops early and charges everything unexplored to eps.
    """

    branch_width: int | None = None
    head_mass: float | None = None
    max_expansions: int | None = None

    def __post_init__(self):
        if self.branch_width is None and self.head_mass is None:
            raise ValueError("set branch_width, head_mass, or both")
        if self.branch_width is not None and self.branch_width < 0:
            raise ValueError(f"branch_width must be >= 0, got {self.branch_width}")
        if self.head_mass is not None and not (0 < self.head_mass <= 1):
            raise ValueError(f"head_mass must be in (0, 1], got {self.head_mass}")
        if self.max_expansions is not None and self.max_expansions < 1:
            raise ValueError(f"max_expansions must be >= 1, got {self.max_expansions}")

    @classmethod
    def exhaustive(cls, vocab_size: int, max_expansions: int | None = None) -> "ApproxConfig":
        """Full expansion: every non-matching support token is a branch."""
        return cls(branch_width=vocab_size, max_expansions=max_expansions)


@dataclass(frozen=True)
class ISPResult:
    """Certified outcome of one exact-n enumeration.

    The true n-ISP lies in ``[value, value + eps]``.  ``breakdown`` splits
    ``value`` by mismatch pattern (1-based positions); its masses sum to
    ``value`` within accumulation error.  ``expansions`` counts model
    queries made; ``budget_limited`` marks an early stop, in which case
    eps covers everything that went unexplored and the bound still holds.
    """

    n: int
    value: float
    eps: float
    breakdown: dict[MismatchPattern, float]
    expansions: int
    budget_limited: bool = False

    @property
    def upper(self) -> float:
        return self.value + self.eps


class Scorer:
    """Effective-distribution cache for one (model, norm, decode) run.

    Enumeration and simulation hammer the same contexts; both the raw
    logits and the transformed distributions are memoized per run.
    """

    def __init__(self, model: Model, norm: NormalizationSpec | None = None,
                 decode: DecodingSpec | None = None, cache_size: int = 65536):
        self.model = model if isinstance(model, CachedModel) else CachedModel(model, cache_size)
        self.norm = norm if norm is not None else NormalizationSpec()
        self.decode = decode if decode is not None else DecodingSpec.sample()
        self._cache: dict[tuple[int, ...], ProbDist] = {}
        self._cache_size = cache_size

    @property
    def vocab_size(self) -> int:
        return self.model.vocab_size

    def effective(self, context: Sequence[int]) -> ProbDist:
        ctx = tuple(int(t) for t in context)
        dist = self._cache.get(ctx)
        if dist is None:
            dist = effective_distribution(self.model.logits(ctx), self.norm, self.decode)
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[ctx] = dist
        return dist

    def token_logprob(self, context: Sequence[int], token: int) -> float:
        return self.effective(context).logprob(int(token))

    def step_logprobs(self, prefix: Sequence[int], suffix: Sequence[int]) -> np.ndarray:
        """Teacher-forced log TP of each suffix token given all true tokens before it."""
        ctx = tuple(int(t) for t in prefix)
        out = np.empty(len(suffix))
        for i, tok in enumerate(suffix):
            out[i] = self.token_logprob(ctx, tok)
            ctx = ctx + (int(tok),)
        return out

    def sequence_logprob(self, prefix: Sequence[int], suffix: Sequence[int]) -> float:
        steps = self.step_logprobs(prefix, suffix)
        if np.any(steps == LOG_ZERO):
            return LOG_ZERO
        return float(np.sum(steps))


def token_probability(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                      context: Sequence[int], token: int) -> float:
    """Probability of one next token under the effective distribution.

    Exactly 0 when the decoder truncates the token away.
    """
    lp = Scorer(model, norm, decode).token_logprob(context, token)
    return math.exp(lp) if lp > LOG_ZERO else 0.0


def exact_sample_probability(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                             record: SequenceRecord) -> float:
    """Probability of generating the record's suffix verbatim from its prefix.

    Product of teacher-forced TPs, accumulated in log space; 0 if any
    factor is 0.  Values below float underflow (~1e-308) come back as 0;
    use ``Scorer.sequence_logprob`` when the log is needed.
    """
    lp = Scorer(model, norm, decode).sequence_logprob(record.prefix, record.suffix)
    return math.exp(lp) if lp > LOG_ZERO else 0.0


def is_memorized_greedy(model: Model, norm: NormalizationSpec, record: SequenceRecord) -> bool:
    """True iff the suffix is exactly the greedy rollout from the prefix.

    Greedy TPs are one-hot, so the greedy ESP is exactly 0 or 1 and the
    check reduces to a log-prob of exactly 0.
    """
    lp = Scorer(model, norm, DecodingSpec.greedy()).sequence_logprob(record.prefix, record.suffix)
    return lp == 0.0


def _exactly_n_candidates(suffix: tuple[int, ...], n: int, vocab_size: int):
    """Yield every same-length sequence differing from ``suffix`` in exactly n positions."""
    from itertools import combinations, product

    m = len(suffix)
    others = [[t for t in range(vocab_size) if t != suffix[i]] for i in range(m)]
    for positions in combinations(range(m), n):
        for repl in product(*(others[i] for i in positions)):
            cand = list(suffix)
            for pos, tok in zip(positions, repl):
                cand[pos] = tok
            yield tuple(cand)


def n_isp_bruteforce(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                     record: SequenceRecord, n: int, *, cap: int = BRUTEFORCE_CAP) -> float:
    """Reference n-ISP: sum ESPs over every exactly-n-mismatch sequence.

    The candidate count is C(m,n) * (V-1)^n; above ``cap`` this refuses and
    the branch-and-bound path is the right tool.  n=0 is the ESP itself.
    """
    m, V = record.m, model.vocab_size
    if not (0 <= n <= m):
        raise ValueError(f"n must be in [0, {m}], got {n}")
    count = math.comb(m, n) * (V - 1) ** n
    if count > cap:
        raise ValueError(
            f"{count} candidate sequences exceeds the brute-force cap {cap}; "
            "use n_isp_approx"
        )
    scorer = Scorer(model, norm, decode)
    log_total = LOG_ZERO
    for cand in _exactly_n_candidates(record.suffix, n, V):
        log_total = float(np.logaddexp(log_total, scorer.sequence_logprob(record.prefix, cand)))
    return math.exp(log_total) if log_total > LOG_ZERO else 0.0


class _Enumeration:
    """Mutable state threaded through one branch-and-bound run."""

    __slots__ = ("scorer", "suffix", "n", "cfg", "log_value", "log_eps",
                 "log_breakdown", "expansions", "budget_limited")

    def __init__(self, scorer: Scorer, suffix: tuple[int, ...], n: int, cfg: ApproxConfig):
        self.scorer = scorer
        self.suffix = suffix
        self.n = n
        self.cfg = cfg
        self.log_value = LOG_ZERO
        self.log_eps = LOG_ZERO
        self.log_breakdown: dict[MismatchPattern, float] = {}
        self.expansions = 0
        self.budget_limited = False

    def _spent(self) -> bool:
        return (self.cfg.max_expansions is not None
                and self.expansions >= self.cfg.max_expansions)

    def _charge_eps(self, logmass: float) -> None:
        if logmass > LOG_ZERO:
            self.log_eps = float(np.logaddexp(self.log_eps, logmass))

    def visit(self, i: int, used: int, logp: float, context: tuple[int, ...],
              pattern: MismatchPattern) -> None:
        if logp == LOG_ZERO:
            return
        m = len(self.suffix)
        if used == self.n:
            # all mismatches placed; the rest of the suffix must match verbatim
            for k in range(i, m):
                if self._spent():
                    self.budget_limited = True
                    self._charge_eps(logp)
                    return
                self.expansions += 1
                logp += self.scorer.token_logprob(context, self.suffix[k])
                if logp == LOG_ZERO:
                    return
                context = context + (self.suffix[k],)
            self.log_value = float(np.logaddexp(self.log_value, logp))
            self.log_breakdown[pattern] = float(
                np.logaddexp(self.log_breakdown.get(pattern, LOG_ZERO), logp))
            return
        if self.n - used > m - i:
            # not enough positions left to place the remaining mismatches;
            # the subtree holds no exactly-n sequence, so pruning is exact
            return
        if self._spent():
            self.budget_limited = True
            self._charge_eps(logp)
            return
        self.expansions += 1
        dist = self.scorer.effective(context)
        true_tok = self.suffix[i]
        self.visit(i + 1, used, logp + dist.logprob(true_tok),
                   context + (true_tok,), pattern)
        order = descending_support_order(dist)
        nonmatch = order[order != true_tok]
        if nonmatch.size == 0:
            return
        cum = np.cumsum(np.exp(dist.logprobs[nonmatch]))
        count = nonmatch.size
        if self.cfg.head_mass is not None:
            target = self.cfg.head_mass * float(cum[-1])
            count = min(count, int(np.searchsorted(cum, target, side="left")) + 1)
        if self.cfg.branch_width is not None:
            count = min(count, self.cfg.branch_width)
        skipped = float(cum[-1]) - (float(cum[count - 1]) if count > 0 else 0.0)
        if skipped > 0.0:
            # worst case: each skipped branch finishes the suffix with prob 1
            self._charge_eps(logp + math.log(skipped))
        for tok in nonmatch[:count]:
            self.visit(i + 1, used + 1, logp + float(dist.logprobs[tok]),
                       context + (int(tok),), pattern + (i + 1,))


def n_isp_approx(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                 record: SequenceRecord, n: int, cfg: ApproxConfig) -> ISPResult:
    """Branch-and-bound n-ISP with a certified error bound.

    Depth-first over suffix positions; at each branch point the match
    branch is always taken and only the configured head of non-matching
    tokens is expanded.  Skipped branch mass times the path probability is
    charged to eps, so ``value <= true n-ISP <= value + eps``.  Expanding
    more branches never decreases value and never increases eps.
    """
    m = record.m
    if not (0 <= n <= m):
        raise ValueError(f"n must be in [0, {m}], got {n}")
    state = _Enumeration(Scorer(model, norm, decode), record.suffix, n, cfg)
    state.visit(0, 0, 0.0, record.prefix, ())
    value = math.exp(state.log_value) if state.log_value > LOG_ZERO else 0.0
    eps = math.exp(state.log_eps) if state.log_eps > LOG_ZERO else 0.0
    breakdown = {pat: math.exp(lv) for pat, lv in sorted(state.log_breakdown.items())}
    return ISPResult(n=n, value=value, eps=eps, breakdown=breakdown,
                     expansions=state.expansions, budget_limited=state.budget_limited)


def cumulative_isp(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                   record: SequenceRecord, n: int, cfg: ApproxConfig) -> ISPResult:
    """Mass over at most n mismatches: sum of i-ISP for i = 0..n.

    Component eps values add, so the bound stays certified.  At n = m with
    full expansion this sums the entire outcome space to 1.  The breakdown
    merges patterns of every size up to n; ``n`` records the cap.
    """
    m = record.m
    if not (0 <= n <= m):
        raise ValueError(f"n must be in [0, {m}], got {n}")
    value = 0.0
    eps = 0.0
    expansions = 0
    limited = False
    breakdown: dict[MismatchPattern, float] = {}
    for i in range(n + 1):
        part = n_isp_approx(model, norm, decode, record, i, cfg)
        value += part.value
        eps += part.eps
        expansions += part.expansions
        limited = limited or part.budget_limited
        breakdown.update(part.breakdown)
    return ISPResult(n=n, value=value, eps=eps, breakdown=breakdown,
                     expansions=expansions, budget_limited=limited)

"""Dataset-level views of per-sequence leak probabilities.

Everything here reduces per-record quantities (ESP, n-ISP results,
per-position TPs) to the aggregate shapes worth reporting: extraction
rates, leakage-vs-query-budget curves, trend classes across a covariate
sweep, positional averages, and exact-vs-partial comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .distributions import DecodingSpec, NormalizationSpec
from .metrics import ISPResult, MismatchPattern, Scorer, SequenceRecord
from .models import Model

__all__ = [
    "LeakageCurve",
    "TrendClass",
    "SeriesPoint",
    "PositionProfile",
    "PartialExactRow",
    "PartialExactReport",
    "extraction_rate",
    "leakage_curve",
    "underestimation_factor",
    "classify_trend",
    "is_zigzag",
    "trend_table",
    "esp_series_over_prefixes",
    "position_profile",
    "partial_vs_exact",
    "pattern_breakdown",
]

# absorbs log/exp roundtrip noise when an ESP sits exactly on a 1/X threshold
_CURVE_SLACK = 1e-12


@dataclass(frozen=True)
class LeakageCurve:
    """Fraction of records leakable within X queries, for X = 1..X_max.

    A record counts as leakable at budget X when its ESP is at least 1/X,
    so the fraction is nondecreasing in X.  Greedy ESPs are all 0 or 1 and
    give a constant curve equal to the extraction rate.
    """

    points: tuple[tuple[int, float], ...]
    scheme: str = ""

    def fraction(self, x: int) -> float:
        for q, f in self.points:
            if q == x:
                return f
        raise KeyError(f"X={x} not on the curve (computed up to {self.points[-1][0]})")


class TrendClass(str, Enum):
    """The six shapes an ESP series can take across a covariate sweep.

    Direction compares the end point to the start point; shape asks whether
    some interior point escapes the band between them (an interior maximum
    makes an inverted U, an interior minimum a U, neither is straight).
    """

    STRAIGHT_DEC = "straight-dec"
    INVERTED_U_DEC = "inverted-u-dec"
    U_DEC = "u-dec"
    STRAIGHT_INC = "straight-inc"
    INVERTED_U_INC = "inverted-u-inc"
    U_INC = "u-inc"


@dataclass(frozen=True)
class SeriesPoint:
    """One point of a covariate sweep: the covariate value and the ESP there."""

    label: float
    esp: float


@dataclass(frozen=True)
class PositionProfile:
    """Mean teacher-forced TP at each suffix position, over records sharing m."""

    mean_tp: tuple[float, ...]
    count: int

    @property
    def last_first_ratio(self) -> float:
        """mean TP at the last position over the first; NaN when the first is 0."""
        if self.mean_tp[0] == 0.0:
            return math.nan
        return self.mean_tp[-1] / self.mean_tp[0]


@dataclass(frozen=True)
class PartialExactRow:
    id: str
    esp: float
    isp_value: float
    isp_upper: float
    verdict: str  # "partial-easier" | "exact-easier" | "inconclusive"


@dataclass(frozen=True)
class PartialExactReport:
    """Per-record verdicts on whether near-miss mass beats the verbatim mass."""

    rows: tuple[PartialExactRow, ...]
    percentages: dict[str, float]


def extraction_rate(esps: Sequence[float]) -> float:
    """Mean ESP; with greedy 0/1 values this is the memorized fraction."""
    if len(esps) == 0:
        raise ValueError("extraction rate of an empty collection")
    return float(np.mean(np.asarray(esps, dtype=np.float64)))


def leakage_curve(esps: Sequence[float], x_max: int, *, scheme: str = "",
                  strict: bool = False) -> LeakageCurve:
    """Fraction of records with ESP >= 1/X for each X in 1..x_max.

    The threshold is inclusive so a deterministic record (ESP 1) counts at
    X = 1; ``strict=True`` switches to a plain > comparison.  A relative
    slack of 1e-12 keeps records whose ESP equals a threshold up to float
    roundtrip noise from falling on the wrong side.
    """
    if x_max < 1:
        raise ValueError(f"x_max must be >= 1, got {x_max}")
    vals = np.asarray(esps, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("leakage curve of an empty collection")
    points = []
    for x in range(1, x_max + 1):
        thr = 1.0 / x
        if strict:
            frac = float(np.mean(vals > thr))
        else:
            frac = float(np.mean(vals >= thr * (1.0 - _CURVE_SLACK)))
        points.append((x, frac))
    return LeakageCurve(points=tuple(points), scheme=scheme)


def underestimation_factor(randomized: LeakageCurve, greedy_rate: float, x: int) -> float:
    """How much larger the randomized-decoding leak fraction at budget X is
    than the deterministic extraction rate.  NaN when the greedy rate is 0
    (the ratio is undefined, and reports must say so rather than invent one).
    """
    if greedy_rate == 0.0:
        return math.nan
    return randomized.fraction(x) / greedy_rate


def _series_values(series: Sequence) -> list[float]:
    vals = [p.esp if isinstance(p, SeriesPoint) else float(p) for p in series]
    if any(math.isnan(v) for v in vals):
        raise ValueError("series contains NaN")
    return vals


def _rank(sorted_distinct: list[float], v: float) -> int:
    import bisect
    return bisect.bisect_left(sorted_distinct, v)


def classify_trend(series: Sequence) -> TrendClass:
    """Assign one of the six trend classes to an ESP series.

    Uses only order relations between the values, so any strictly
    increasing transform of the series classifies identically.  Direction:
    Inc iff end > start (ties count as Inc).  Shape: Straight when no
    interior point leaves [min(start, end), max(start, end)]; interior
    points above that band make an inverted U, below make a U.  A series
    with escapes on both sides is not one of the six shapes; it is binned
    by whichever escape is larger in rank terms (distance in the sorted
    order of distinct values), ties going to the escape occurring first.
    Use ``is_zigzag`` to flag such series.
    """
    vals = _series_values(series)
    if len(vals) < 3:
        raise ValueError(f"need at least 3 points to classify, got {len(vals)}")
    s, e = vals[0], vals[-1]
    interior = vals[1:-1]
    hi, lo = max(s, e), min(s, e)
    above = [v for v in interior if v > hi]
    below = [v for v in interior if v < lo]
    inc = e >= s
    if not above and not below:
        return TrendClass.STRAIGHT_INC if inc else TrendClass.STRAIGHT_DEC
    if above and not below:
        return TrendClass.INVERTED_U_INC if inc else TrendClass.INVERTED_U_DEC
    if below and not above:
        return TrendClass.U_INC if inc else TrendClass.U_DEC
    distinct = sorted(set(vals))
    dev_above = _rank(distinct, max(above)) - _rank(distinct, hi)
    dev_below = _rank(distinct, lo) - _rank(distinct, min(below))
    if dev_above != dev_below:
        dominant_above = dev_above > dev_below
    else:
        # equal escapes: earlier one in the series wins
        first_above = next(i for i, v in enumerate(interior) if v == max(above))
        first_below = next(i for i, v in enumerate(interior) if v == min(below))
        dominant_above = first_above < first_below
    if dominant_above:
        return TrendClass.INVERTED_U_INC if inc else TrendClass.INVERTED_U_DEC
    return TrendClass.U_INC if inc else TrendClass.U_DEC


def is_zigzag(series: Sequence) -> bool:
    """True when interior points escape on both sides of the start/end band,
    i.e. the series is not literally one of the six shapes."""
    vals = _series_values(series)
    if len(vals) < 3:
        return False
    hi, lo = max(vals[0], vals[-1]), min(vals[0], vals[-1])
    interior = vals[1:-1]
    return any(v > hi for v in interior) and any(v < lo for v in interior)


def trend_table(series_collection: Iterable[Sequence]) -> dict[TrendClass, float]:
    """Percentage of series falling in each trend class; sums to 100."""
    counts = {cls: 0 for cls in TrendClass}
    total = 0
    for series in series_collection:
        counts[classify_trend(series)] += 1
        total += 1
    if total == 0:
        raise ValueError("no series to tabulate")
    return {cls: 100.0 * c / total for cls, c in counts.items()}


def esp_series_over_prefixes(model: Model, norm: NormalizationSpec, decode: DecodingSpec,
                             record: SequenceRecord, lengths: Sequence[int]) -> list[SeriesPoint]:
    """ESP of the record's suffix as the prompt grows.

    Each length L keeps the L prefix tokens nearest the suffix (the tokens
    the generation would actually condition on).  Lengths must be strictly
    increasing and fit inside the stored prefix.
    """
    if not lengths:
        raise ValueError("no lengths given")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError(f"lengths must be strictly increasing, got {list(lengths)}")
    if lengths[-1] > record.j:
        raise ValueError(
            f"record {record.id!r}: length {lengths[-1]} exceeds stored prefix ({record.j} tokens)")
    scorer = Scorer(model, norm, decode)
    out = []
    for L in lengths:
        lp = scorer.sequence_logprob(record.prefix[record.j - L:], record.suffix)
        out.append(SeriesPoint(label=float(L), esp=math.exp(lp) if lp > -math.inf else 0.0))
    return out


def position_profile(records: Sequence[SequenceRecord], model: Model,
                     norm: NormalizationSpec, decode: DecodingSpec) -> PositionProfile:
    """Mean teacher-forced TP per suffix position across records of equal length."""
    if not records:
        raise ValueError("no records")
    m = records[0].m
    for r in records:
        if r.m != m:
            raise ValueError(
                f"mixed suffix lengths: record {r.id!r} has m={r.m}, expected {m}")
    scorer = Scorer(model, norm, decode)
    acc = np.zeros(m)
    for r in records:
        acc += np.exp(scorer.step_logprobs(r.prefix, r.suffix))
    mean = acc / len(records)
    return PositionProfile(mean_tp=tuple(float(v) for v in mean), count=len(records))


def partial_vs_exact(ids: Sequence[str], esps: Sequence[float],
                     isps: Sequence[ISPResult]) -> PartialExactReport:
    """Compare each record's near-miss mass against its verbatim mass.

    partial-easier when the certified lower bound already beats the ESP;
    exact-easier when even value + eps stays below it; inconclusive exactly
    when the ESP lies inside [value, value + eps].
    """
    if not (len(ids) == len(esps) == len(isps)):
        raise ValueError("ids, esps and isps must align")
    rows = []
    tally = {"partial-easier": 0, "exact-easier": 0, "inconclusive": 0}
    for rid, esp, isp in zip(ids, esps, isps):
        if isp.value > esp:
            verdict = "partial-easier"
        elif isp.upper < esp:
            verdict = "exact-easier"
        else:
            verdict = "inconclusive"
        tally[verdict] += 1
        rows.append(PartialExactRow(id=rid, esp=float(esp), isp_value=isp.value,
                                    isp_upper=isp.upper, verdict=verdict))
    n = len(rows) if rows else 1
    percentages = {k: 100.0 * v / n for k, v in tally.items()}
    return PartialExactReport(rows=tuple(rows), percentages=percentages)


def pattern_breakdown(isps: Sequence[ISPResult], top_n: int) -> dict[MismatchPattern, int]:
    """Which mismatch pattern carries the most mass, tallied over the top
    records by ISP value.

    Records tie-break by original order; within a record, equal-mass
    patterns resolve to the lexicographically smallest.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    ranked = sorted(range(len(isps)), key=lambda i: (-isps[i].value, i))[:top_n]
    tally: dict[MismatchPattern, int] = {}
    for i in ranked:
        breakdown = isps[i].breakdown
        if not breakdown:
            continue
        best = max(sorted(breakdown), key=lambda pat: breakdown[pat])
        tally[best] = tally.get(best, 0) + 1
    return tally

"""Independent reference implementations used as test oracles.

Everything here works in plain linear probability space with none of the
package's machinery: transforms are built from sort/cumsum directly, and
exact-n mass is a full enumeration over all V^m sequences filtered by
Hamming distance.  Slow and simple on purpose.
"""

from itertools import product

import numpy as np


def eff_dist(logits, norm="softmax", temp=1.0, decode="sample", k=None, p=None):
    """Effective distribution as plain probabilities, first principles."""
    z = np.asarray(logits, dtype=np.float64)
    if norm == "temp":
        z = z / temp
    w = np.exp(z - np.max(z))
    probs = w / w.sum()
    if decode == "greedy":
        out = np.zeros_like(probs)
        out[int(np.argmax(probs))] = 1.0
        return out
    if decode == "topk":
        if k >= np.count_nonzero(probs):
            return probs
        order = np.argsort(-probs, kind="stable")
        keep = order[:k]
        out = np.zeros_like(probs)
        out[keep] = probs[keep] / probs[keep].sum()
        return out
    if decode == "topp":
        if p == 1.0:
            return probs
        order = np.argsort(-probs, kind="stable")
        order = order[probs[order] > 0]
        csum = np.cumsum(probs[order])
        cnt = 1
        while csum[cnt - 1] < p and cnt < order.size:
            cnt += 1
        if cnt == order.size:
            return probs
        keep = order[:cnt]
        out = np.zeros_like(probs)
        out[keep] = probs[keep] / probs[keep].sum()
        return out
    return probs


def hamming(a, b):
    return sum(1 for x, y in zip(a, b) if x != y)


def seq_prob(dist_of, prefix, seq):
    """Linear-space probability of emitting seq after prefix.

    ``dist_of(context) -> probability vector`` supplies the effective
    distribution per context.
    """
    ctx = tuple(prefix)
    total = 1.0
    for tok in seq:
        total *= float(dist_of(ctx)[tok])
        if total == 0.0:
            return 0.0
        ctx = ctx + (tok,)
    return total


def exact_n_mass(dist_of, prefix, suffix, n, vocab_size):
    """Sum of seq_prob over all length-m sequences at Hamming distance n."""
    m = len(suffix)
    total = 0.0
    for cand in product(range(vocab_size), repeat=m):
        if hamming(cand, suffix) == n:
            total += seq_prob(dist_of, prefix, cand)
    return total


def trend_oracle(values):
    """Literal transliteration of the six trend shapes plus the documented
    tie rules; returns one of the same string values the package uses.

    Direction: compare last to first, ties are Inc.  Shape: look for
    interior points outside the band between first and last.  Both-sided
    escapes bin by rank distance beyond the band, earliest escape winning
    ties.
    """
    first, last = values[0], values[-1]
    mid = list(values[1:-1])
    top, bot = max(first, last), min(first, last)
    inc = not (last < first)
    has_max = any(v > top for v in mid)
    has_min = any(v < bot for v in mid)
    if not has_max and not has_min:
        return "straight-inc" if inc else "straight-dec"
    if has_max and not has_min:
        return "inverted-u-inc" if inc else "inverted-u-dec"
    if has_min and not has_max:
        return "u-inc" if inc else "u-dec"
    ladder = sorted(set(values))
    up = ladder.index(max(v for v in mid if v > top)) - ladder.index(top)
    down = ladder.index(bot) - ladder.index(min(v for v in mid if v < bot))
    if up > down:
        peak = True
    elif down > up:
        peak = False
    else:
        hi_val = max(v for v in mid if v > top)
        lo_val = min(v for v in mid if v < bot)
        peak = mid.index(hi_val) < mid.index(lo_val)
    if peak:
        return "inverted-u-inc" if inc else "inverted-u-dec"
    return "u-inc" if inc else "u-dec"

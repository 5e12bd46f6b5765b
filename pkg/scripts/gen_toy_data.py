#!/usr/bin/env python3
"""Regenerate the committed toy fixtures in data/toy/.

Four records share a 3-token prefix; the table model gives their suffixes
first-token probabilities 0.4 / 0.3 / 0.2 / 0.05 and one-hot continuations,
so ESPs are exactly those four values and greedy memorizes only the first
record (greedy rate 0.25).  The leakable fraction then crosses the greedy
line at X=4 and reaches 1.0 at X=20.  Deterministic output; safe to rerun.
"""

import json
from pathlib import Path

import numpy as np

V = 8
PREFIX = [0, 1, 2]
# suffix -> first-token probability
RECORDS = {
    "toy-a": ([3, 4, 5, 6], 0.4),
    "toy-b": ([4, 5, 6, 7], 0.3),
    "toy-c": ([5, 6, 7, 3], 0.2),
    "toy-d": ([6, 7, 3, 4], 0.05),
}


def onehot(tok):
    row = [0.0] * V
    row[tok] = 1.0
    return row


def main():
    out = Path(__file__).resolve().parent.parent / "data" / "toy"
    out.mkdir(parents=True, exist_ok=True)

    first = [0.0] * V
    for suffix, p in RECORDS.values():
        first[suffix[0]] = p
    first[7] += 1.0 - sum(first)  # remainder keeps the row a distribution

    entries = [{"context": PREFIX, "probs": first}]
    for suffix, _ in RECORDS.values():
        ctx = PREFIX + suffix[:1]
        for tok in suffix[1:]:
            entries.append({"context": list(ctx), "probs": onehot(tok)})
            ctx = ctx + [tok]
    table = {"vocab_size": V, "default": [1.0 / V] * V, "entries": entries}
    with open(out / "model_table.json", "w") as fh:
        json.dump(table, fh, indent=1)
        fh.write("\n")

    with open(out / "records.jsonl", "w") as fh:
        for rid, (suffix, p) in RECORDS.items():
            rec = {"id": rid, "prefix": PREFIX, "suffix": suffix,
                   "tags": {"first_tp": p}}
            fh.write(json.dumps(rec) + "\n")

    rng = np.random.Generator(np.random.Philox(12345))
    corpus = rng.integers(0, 6, size=400)
    with open(out / "corpus.ids", "w") as fh:
        fh.write(" ".join(str(int(t)) for t in corpus) + "\n")

    print(f"wrote {out}/model_table.json, records.jsonl, corpus.ids")


if __name__ == "__main__":
    main()

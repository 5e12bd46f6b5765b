import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from seqleak import TableModel

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data" / "toy"


@pytest.fixture
def toy_paths():
    return {
        "records": DATA / "records.jsonl",
        "table": DATA / "model_table.json",
        "corpus": DATA / "corpus.ids",
    }


def rand_probs(rng: np.random.Generator, v: int, floor: float = 0.02) -> np.ndarray:
    """A strictly positive random distribution (no accidental near-zeros)."""
    p = rng.random(v) + floor
    return p / p.sum()


def rand_table(rng: np.random.Generator, v: int, prefix, suffix) -> TableModel:
    """Random table with distinct rows along the matched spine, random default.

    Mismatch branches fall through to the default row, so both lookup paths
    get exercised by enumeration.
    """
    model = TableModel(v, rand_probs(rng, v))
    ctx = tuple(prefix)
    for tok in suffix:
        model.set_context(ctx, rand_probs(rng, v))
        ctx = ctx + (int(tok),)
    return model


def rand_case(rng: np.random.Generator, v_max: int = 8, m_max: int = 4):
    """One randomized (model, prefix, suffix) triple for oracle comparisons."""
    v = int(rng.integers(3, v_max + 1))
    m = int(rng.integers(1, m_max + 1))
    prefix = tuple(int(t) for t in rng.integers(0, v, size=int(rng.integers(1, 3))))
    suffix = tuple(int(t) for t in rng.integers(0, v, size=m))
    return rand_table(rng, v, prefix, suffix), prefix, suffix

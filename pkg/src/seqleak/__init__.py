"""Per-sequence training-data leak probabilities under decoding schemes.

The pipeline: a model backend maps contexts to logits; a normalization and
a decoding transform turn logits into the effective distribution the
generation process samples from; metrics integrate that distribution into
per-sequence leak probabilities (verbatim and near-miss, the latter with
certified error bounds); analysis aggregates records into curves, trends,
and reports; montecarlo validates the closed forms by actually sampling.
"""

__version__ = "0.1.0"

from .distributions import (
    LOG_ZERO,
    DecodingSpec,
    NormalizationSpec,
    ProbDist,
    apply_greedy,
    apply_top_k,
    apply_top_p,
    effective_distribution,
    softmax,
    softmax_temperature,
)
from .models import (
    CachedModel,
    BridgeError,
    NGramModel,
    RemoteModel,
    TableModel,
    load_model,
    next_distribution,
    train_ngram,
)
from .metrics import (
    ApproxConfig,
    ISPResult,
    Scorer,
    SequenceRecord,
    cumulative_isp,
    exact_sample_probability,
    is_memorized_greedy,
    n_isp_approx,
    n_isp_bruteforce,
    pattern_label,
    token_probability,
)
from .analysis import (
    LeakageCurve,
    PartialExactReport,
    PartialExactRow,
    PositionProfile,
    SeriesPoint,
    TrendClass,
    classify_trend,
    esp_series_over_prefixes,
    extraction_rate,
    is_zigzag,
    leakage_curve,
    partial_vs_exact,
    pattern_breakdown,
    position_profile,
    trend_table,
    underestimation_factor,
)
from .montecarlo import (
    FreqEstimate,
    SamplerConfig,
    estimate_leak_freq,
    estimate_partial_freq,
    record_rng,
    rollout_mismatch_hist,
    sample_suffix,
)
from .dataset import Dataset, DatasetError, ingest_dataset

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
    "TableModel",
    "NGramModel",
    "RemoteModel",
    "CachedModel",
    "BridgeError",
    "next_distribution",
    "train_ngram",
    "load_model",
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
    "LeakageCurve",
    "TrendClass",
    "SeriesPoint",
    "PositionProfile",
    "PartialExactReport",
    "PartialExactRow",
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
    "SamplerConfig",
    "FreqEstimate",
    "sample_suffix",
    "record_rng",
    "rollout_mismatch_hist",
    "estimate_leak_freq",
    "estimate_partial_freq",
    "Dataset",
    "DatasetError",
    "ingest_dataset",
]

"""Batch front end: score a JSONL dataset and emit plot-ready reports.

Every subcommand reads one dataset, runs one configuration, and writes
up to three files into --out: a CSV, a JSON document carrying the same
rows plus summary fields, and a manifest recording the exact configuration
(with a content hash) so reruns are reproducible byte for byte.

Exit codes: 0 success, 2 bad configuration, 3 bad dataset, 4 model or
bridge failure, 5 enumeration stopped by the expansion budget (outputs
are still written; eps covers the unexplored remainder).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    classify_trend,
    esp_series_over_prefixes,
    extraction_rate,
    is_zigzag,
    leakage_curve,
    partial_vs_exact,
    pattern_breakdown,
    position_profile,
    trend_table,
)
from .dataset import DatasetError, ingest_dataset
from .distributions import DecodingSpec, NormalizationSpec
from .metrics import (
    ApproxConfig,
    Scorer,
    SequenceRecord,
    is_memorized_greedy,
    n_isp_approx,
    n_isp_bruteforce,
    pattern_label,
)
from .models import BridgeError, CachedModel, load_model
from .montecarlo import FreqEstimate, SamplerConfig, rollout_mismatch_hist

EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_MODEL = 4
EXIT_BUDGET = 5


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _py(v):
    """Plain python scalars only; numpy types leak bad reprs into reports."""
    if isinstance(v, np.generic):
        return v.item()
    return v


def _cell(v) -> str:
    v = _py(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    obj = _py(obj)
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _config_hash(config: dict) -> str:
    canon = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _parse_lengths(text: str) -> tuple[int, ...]:
    try:
        lengths = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise CliError(EXIT_CONFIG, "config",
                       f"--lengths must be comma-separated integers, got {text!r}")
    if not lengths or any(b <= a for a, b in zip(lengths, lengths[1:])) or lengths[0] < 1:
        raise CliError(EXIT_CONFIG, "config",
                       f"--lengths must be strictly increasing positive integers, got {text!r}")
    return lengths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqleak",
        description="Per-sequence leak probabilities for language models "
                    "under decoding schemes",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser, approx: bool = False):
        p.add_argument("dataset", help="JSONL dataset path")
        p.add_argument("--model", required=True,
                       help="table:PATH | ngram:PATH,ORDER[,ALPHA] | bridge:ENDPOINT")
        p.add_argument("--norm", default="softmax", help="softmax | temp:K")
        p.add_argument("--decode", default="sample",
                       help="greedy | sample | topk:K | topp:P")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="runs", help="output directory")
        p.add_argument("--format", choices=["csv", "json", "both"], default="both")
        if approx:
            p.add_argument("--n", type=int, default=1, help="exact mismatch count")
            p.add_argument("--branch-width", type=int, default=None,
                           help="expand at most this many non-matching tokens per step")
            p.add_argument("--head-mass", type=float, default=None,
                           help="expand non-matching tokens covering this mass fraction")
            p.add_argument("--max-expansions", type=int, default=None,
                           help="stop after this many model queries (eps absorbs the rest)")

    common(sub.add_parser("score", help="ESP per record"))
    common(sub.add_parser("isp", help="exact-n mismatch mass with certified bound"),
           approx=True)
    p = sub.add_parser("curve", help="leakable fraction vs query budget")
    common(p)
    p.add_argument("--xmax", type=int, default=100)
    p = sub.add_parser("trends", help="classify ESP trends across prefix lengths")
    common(p)
    p.add_argument("--lengths", required=True, help="comma-separated prefix lengths")
    common(sub.add_parser("positions", help="mean TP per suffix position"))
    p = sub.add_parser("partial", help="near-miss vs verbatim comparison")
    common(p, approx=True)
    p.add_argument("--top-n", type=int, default=100,
                   help="records counted in the pattern tally")
    p = sub.add_parser("simulate", help="Monte Carlo cross-check of ESP and n-ISP")
    common(p)
    p.add_argument("--n", type=int, default=1, help="exact mismatch count to validate")
    p.add_argument("--trials", type=int, default=20000)
    p = sub.add_parser("sweep-prefix", help="ESP series over growing prefixes")
    common(p)
    p.add_argument("--lengths", required=True, help="comma-separated prefix lengths")
    return parser


def _approx_config(args) -> ApproxConfig:
    width, mass = args.branch_width, args.head_mass
    if width is None and mass is None:
        width = 16  # sensible default head when neither knob is given
    try:
        return ApproxConfig(branch_width=width, head_mass=mass,
                            max_expansions=args.max_expansions)
    except ValueError as e:
        raise CliError(EXIT_CONFIG, "config", str(e))


def _load(args):
    try:
        norm = NormalizationSpec.parse(args.norm)
        decode = DecodingSpec.parse(args.decode)
    except ValueError as e:
        raise CliError(EXIT_CONFIG, "config", str(e))
    try:
        dataset = ingest_dataset(args.dataset)
    except FileNotFoundError:
        raise CliError(EXIT_DATASET, "dataset", f"dataset not found: {args.dataset}")
    except DatasetError as e:
        raise CliError(EXIT_DATASET, "dataset", str(e))
    try:
        model = load_model(args.model)
    except ValueError as e:
        raise CliError(EXIT_CONFIG, "config", str(e))
    except (OSError, json.JSONDecodeError, BridgeError, KeyError) as e:
        raise CliError(EXIT_MODEL, "model", f"cannot load model {args.model!r}: {e}")
    try:
        dataset.validate_vocab(model.vocab_size)
    except DatasetError as e:
        raise CliError(EXIT_DATASET, "dataset", str(e))
    return dataset, CachedModel(model), norm, decode


def _run_score(args, dataset, model, norm, decode):
    scorer = Scorer(model, norm, decode)
    rows, records = [], []
    esps = []
    for rec in dataset.records:
        lp = scorer.sequence_logprob(rec.prefix, rec.suffix)
        esp = math.exp(lp) if lp > -math.inf else 0.0
        memorized = is_memorized_greedy(model, norm, rec)
        esps.append(esp)
        rows.append([rec.id, esp, lp, memorized])
        records.append({"id": rec.id, "esp": esp, "log_esp": lp,
                        "memorized_greedy": memorized})
    header = ["id", "esp", "log_esp", "memorized_greedy"]
    summary = {
        "records": records,
        "extraction_rate": extraction_rate(esps),
        "greedy_rate": extraction_rate([1.0 if r[3] else 0.0 for r in rows]),
    }
    return header, rows, summary, 0


def _isp_row(rec: SequenceRecord, result):
    if result.breakdown:
        top = max(sorted(result.breakdown), key=lambda pat: result.breakdown[pat])
        top_label, top_mass = pattern_label(top), result.breakdown[top]
    else:
        top_label, top_mass = "", 0.0
    return ([rec.id, result.n, result.value, result.eps, result.upper,
             result.expansions, result.budget_limited, top_label, top_mass],
            {"id": rec.id, "n": result.n, "value": result.value, "eps": result.eps,
             "upper": result.upper, "expansions": result.expansions,
             "budget_limited": result.budget_limited,
             "breakdown": {pattern_label(p): v for p, v in result.breakdown.items()}})


def _run_isp(args, dataset, model, norm, decode):
    cfg = _approx_config(args)
    rows, records = [], []
    limited = False
    for rec in dataset.records:
        if not (0 <= args.n <= rec.m):
            raise CliError(EXIT_CONFIG, "config",
                           f"--n {args.n} out of range for record {rec.id!r} (m={rec.m})")
        result = n_isp_approx(model, norm, decode, rec, args.n, cfg)
        limited = limited or result.budget_limited
        row, obj = _isp_row(rec, result)
        rows.append(row)
        records.append(obj)
    header = ["id", "n", "value", "eps", "upper", "expansions", "budget_limited",
              "top_pattern", "top_pattern_mass"]
    summary = {"records": records, "n": args.n, "budget_limited": limited}
    return header, rows, summary, EXIT_BUDGET if limited else 0


def _run_curve(args, dataset, model, norm, decode):
    if args.xmax < 1:
        raise CliError(EXIT_CONFIG, "config", f"--xmax must be >= 1, got {args.xmax}")
    scorer = Scorer(model, norm, decode)
    esps = []
    for rec in dataset.records:
        lp = scorer.sequence_logprob(rec.prefix, rec.suffix)
        esps.append(math.exp(lp) if lp > -math.inf else 0.0)
    greedy_rate = extraction_rate(
        [1.0 if is_memorized_greedy(model, norm, rec) else 0.0 for rec in dataset.records])
    curve = leakage_curve(esps, args.xmax, scheme=f"{norm.label()}+{decode.label()}")
    rows = []
    for x, frac in curve.points:
        under = frac / greedy_rate if greedy_rate > 0 else None
        rows.append([x, frac, greedy_rate, under])
    header = ["x", "fraction", "greedy_rate", "underestimation"]
    summary = {"scheme": curve.scheme, "greedy_rate": greedy_rate,
               "points": [[x, f] for x, f in curve.points],
               "underestimation": [r[3] for r in rows]}
    return header, rows, summary, 0


def _run_trends(args, dataset, model, norm, decode):
    lengths = _parse_lengths(args.lengths)
    rows, all_series = [], []
    for rec in dataset.records:
        try:
            series = esp_series_over_prefixes(model, norm, decode, rec, lengths)
        except ValueError as e:
            raise CliError(EXIT_CONFIG, "config", str(e))
        all_series.append(series)
        rows.append([rec.id, classify_trend(series).value, is_zigzag(series)])
    table = trend_table(all_series)
    header = ["id", "trend", "zigzag"]
    summary = {
        "lengths": list(lengths),
        "records": [{"id": r[0], "trend": r[1], "zigzag": r[2]} for r in rows],
        "table": {cls.value: pct for cls, pct in table.items()},
    }
    return header, rows, summary, 0


def _run_positions(args, dataset, model, norm, decode):
    try:
        profile = position_profile(dataset.records, model, norm, decode)
    except ValueError as e:
        raise CliError(EXIT_DATASET, "dataset", str(e))
    rows = [[i + 1, tp] for i, tp in enumerate(profile.mean_tp)]
    header = ["position", "mean_tp"]
    ratio = profile.last_first_ratio
    summary = {"count": profile.count, "mean_tp": list(profile.mean_tp),
               "last_first_ratio": None if math.isnan(ratio) else ratio}
    return header, rows, summary, 0


def _run_partial(args, dataset, model, norm, decode):
    cfg = _approx_config(args)
    scorer = Scorer(model, norm, decode)
    ids, esps, isps = [], [], []
    limited = False
    for rec in dataset.records:
        if not (0 <= args.n <= rec.m):
            raise CliError(EXIT_CONFIG, "config",
                           f"--n {args.n} out of range for record {rec.id!r} (m={rec.m})")
        lp = scorer.sequence_logprob(rec.prefix, rec.suffix)
        esps.append(math.exp(lp) if lp > -math.inf else 0.0)
        result = n_isp_approx(model, norm, decode, rec, args.n, cfg)
        limited = limited or result.budget_limited
        isps.append(result)
        ids.append(rec.id)
    report = partial_vs_exact(ids, esps, isps)
    patterns = pattern_breakdown(isps, max(1, min(args.top_n, len(isps))))
    rows = []
    for row, isp in zip(report.rows, isps):
        if isp.breakdown:
            top = max(sorted(isp.breakdown), key=lambda pat: isp.breakdown[pat])
            top_label, top_mass = pattern_label(top), isp.breakdown[top]
        else:
            top_label, top_mass = "", 0.0
        rows.append([row.id, row.esp, row.isp_value, row.isp_upper, row.verdict,
                     top_label, top_mass])
    header = ["id", "esp", "isp_value", "isp_upper", "verdict",
              "top_pattern", "top_pattern_mass"]
    summary = {
        "n": args.n,
        "records": [{"id": r.id, "esp": r.esp, "isp_value": r.isp_value,
                     "isp_upper": r.isp_upper, "verdict": r.verdict} for r in report.rows],
        "percentages": report.percentages,
        "patterns": {pattern_label(p): c for p, c in sorted(patterns.items())},
        "budget_limited": limited,
    }
    return header, rows, summary, EXIT_BUDGET if limited else 0


def _run_simulate(args, dataset, model, norm, decode):
    if args.trials < 1:
        raise CliError(EXIT_CONFIG, "config", f"--trials must be >= 1, got {args.trials}")
    cfg = SamplerConfig(trials=args.trials, seed=args.seed)
    scorer = Scorer(model, norm, decode)
    rows, records = [], []
    all_ok = True
    for rec in dataset.records:
        if not (0 <= args.n <= rec.m):
            raise CliError(EXIT_CONFIG, "config",
                           f"--n {args.n} out of range for record {rec.id!r} (m={rec.m})")
        lp = scorer.sequence_logprob(rec.prefix, rec.suffix)
        esp = math.exp(lp) if lp > -math.inf else 0.0
        try:
            isp = n_isp_bruteforce(model, norm, decode, rec, args.n)
        except ValueError as e:
            raise CliError(EXIT_CONFIG, "config", str(e))
        hist = rollout_mismatch_hist(model, norm, decode, rec, cfg)
        esp_est = FreqEstimate(hits=int(hist[0]), trials=cfg.trials)
        isp_est = FreqEstimate(hits=int(hist[args.n]), trials=cfg.trials)
        esp_ok = esp_est.within(esp)
        isp_ok = isp_est.within(isp)
        all_ok = all_ok and esp_ok and isp_ok
        rows.append([rec.id, esp, esp_est.freq, esp_est.stderr, esp_ok,
                     isp, isp_est.freq, isp_est.stderr, isp_ok])
        records.append({"id": rec.id, "esp": esp, "esp_freq": esp_est.freq,
                        "esp_stderr": esp_est.stderr, "esp_ok": esp_ok,
                        "isp": isp, "isp_freq": isp_est.freq,
                        "isp_stderr": isp_est.stderr, "isp_ok": isp_ok})
    header = ["id", "esp", "esp_freq", "esp_stderr", "esp_ok",
              "isp", "isp_freq", "isp_stderr", "isp_ok"]
    summary = {"n": args.n, "trials": args.trials, "records": records,
               "all_within_4sigma": all_ok}
    return header, rows, summary, 0


def _run_sweep_prefix(args, dataset, model, norm, decode):
    lengths = _parse_lengths(args.lengths)
    rows, records = [], []
    for rec in dataset.records:
        try:
            series = esp_series_over_prefixes(model, norm, decode, rec, lengths)
        except ValueError as e:
            raise CliError(EXIT_CONFIG, "config", str(e))
        for pt in series:
            rows.append([rec.id, int(pt.label), pt.esp])
        records.append({"id": rec.id, "series": [[int(p.label), p.esp] for p in series]})
    header = ["id", "length", "esp"]
    summary = {"lengths": list(lengths), "records": records}
    return header, rows, summary, 0


_RUNNERS = {
    "score": _run_score,
    "isp": _run_isp,
    "curve": _run_curve,
    "trends": _run_trends,
    "positions": _run_positions,
    "partial": _run_partial,
    "simulate": _run_simulate,
    "sweep-prefix": _run_sweep_prefix,
}


def _manifest(args) -> dict:
    config = {k: _py(v) for k, v in sorted(vars(args).items()) if k != "subcommand"}
    return {
        "subcommand": args.subcommand,
        "config": config,
        "config_hash": _config_hash({"subcommand": args.subcommand, **config}),
        "seed": args.seed,
        "versions": {
            "seqleak": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
    }


def run(args) -> int:
    dataset, model, norm, decode = _load(args)
    header, rows, summary, code = _RUNNERS[args.subcommand](
        args, dataset, model, norm, decode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.subcommand.replace("-", "_")
    if args.format in ("csv", "both"):
        _write_csv(out / f"{name}.csv", header, rows)
    if args.format in ("json", "both"):
        _write_json(out / f"{name}.json", summary)
    _write_json(out / "manifest.json", _manifest(args))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except CliError as e:
        json.dump({"error": {"kind": e.kind, "message": str(e)}}, sys.stderr)
        sys.stderr.write("\n")
        return e.code
    except BridgeError as e:
        json.dump({"error": {"kind": "model", "message": str(e)}}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Run the whole reporting pipeline on the bundled toy dataset.

Produces one output directory per subcommand under --out and prints a
digest of the headline numbers.  Everything is deterministic for a fixed
seed, so rerunning overwrites the same bytes.

Usage:
    python3 scripts/run_desk_scale.py
    python3 scripts/run_desk_scale.py --out runs/desk --trials 50000
    python3 scripts/run_desk_scale.py --decode topk:4
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from seqleak.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
DATASET = ROOT / "data" / "toy" / "records.jsonl"
MODEL = f"table:{ROOT / 'data' / 'toy' / 'model_table.json'}"


def run(out_dir: Path, subcommand: str, *extra: str, decode: str, seed: int) -> dict:
    out = out_dir / subcommand
    argv = [subcommand, str(DATASET), "--model", MODEL, "--decode", decode,
            "--seed", str(seed), "--out", str(out), *extra]
    t0 = time.monotonic()
    code = cli_main(argv)
    dt = time.monotonic() - t0
    if code not in (0, 5):
        print(f"  {subcommand}: exit {code}", file=sys.stderr)
        sys.exit(code)
    summary = json.loads((out / f"{subcommand.replace('-', '_')}.json").read_text())
    print(f"  {subcommand:<13s} exit {code}  {dt * 1000:7.1f} ms  -> {out}")
    return summary


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/desk", help="output root")
    ap.add_argument("--decode", default="sample")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--xmax", type=int, default=30)
    args = ap.parse_args()
    out_dir = Path(args.out)
    kw = {"decode": args.decode, "seed": args.seed}

    print(f"dataset {DATASET}")
    score = run(out_dir, "score", **kw)
    isp = run(out_dir, "isp", "--n", "1", "--branch-width", "8", **kw)
    curve = run(out_dir, "curve", "--xmax", str(args.xmax), **kw)
    trends = run(out_dir, "trends", "--lengths", "1,2,3", **kw)
    positions = run(out_dir, "positions", **kw)
    partial = run(out_dir, "partial", "--n", "1", "--branch-width", "8", **kw)
    simulate = run(out_dir, "simulate", "--n", "1", "--trials", str(args.trials), **kw)
    run(out_dir, "sweep-prefix", "--lengths", "1,2,3", **kw)

    print()
    print(f"extraction rate      {score['extraction_rate']:.4f}")
    print(f"greedy rate          {score['greedy_rate']:.4f}")
    points = dict(map(tuple, curve["points"]))
    crossing = next((x for x in sorted(points) if points[x] > curve["greedy_rate"]),
                    None)
    print(f"curve crosses greedy {'at X=' + str(crossing) if crossing else 'never'}")
    under = [u for u in curve["underestimation"] if u is not None]
    if under:
        print(f"underestimation      up to {max(under):.2f}x"
              f" (X={args.xmax})")
    shares = {k: v for k, v in trends["table"].items() if v > 0}
    print(f"trend shares         {shares}")
    mean_tp = positions["mean_tp"]
    ratio = positions["last_first_ratio"]
    print(f"mean TP by position  {[round(v, 4) for v in mean_tp]}"
          f"  last/first {'n/a' if ratio is None else f'{ratio:.2f}x'}")
    print(f"verdicts             {partial['percentages']}")
    print(f"dominant patterns    {partial['patterns']}")
    ok = simulate["all_within_4sigma"]
    print(f"simulation check     {'all within 4 sigma' if ok else 'DISAGREEMENT'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

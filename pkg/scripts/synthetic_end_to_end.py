"""Synthesize a cohort with chosen group effects and run the whole pipeline on it.

Example:
    python scripts/synthetic_end_to_end.py --out runs/speed --effect stroke_speed=-1.5 --seed 1
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pahaw.cli import main as cli
from pahaw.cv_eval import EvalReport


def parse_args(argv=None) -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-per-group", type=int, default=20)
    p.add_argument("--effect", action="append", default=[], metavar="FAMILY=SD")
    p.add_argument("--tasks", default="2-8")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--grid", choices=("full", "reduced"), default="reduced")
    p.add_argument("--mode", choices=("nested", "paper-faithful"), default="nested")
    return p.parse_args(argv)


def run(args: argparse.Namespace) -> int:
    data, out = args.out / "data", args.out / "features"
    effects = [x for e in args.effect for x in ("--effect", e)]
    steps = [
        ["synth", "--seed", str(args.seed), "--n-per-group", str(args.n_per_group), "--out", str(data), *effects],
        ["extract", "--data-root", str(data), "--out", str(out), "--tasks", args.tasks],
        ["rank", "--out", str(out), "--tasks", args.tasks, "--top", "15"],
        ["evaluate", "--out", str(out), "--seed", str(args.seed), "--tasks", args.tasks, "--features", "all",
         "--classifier", "all", "--repeats", str(args.repeats), "--grid", args.grid, "--mode", args.mode],
    ]
    for argv in steps:
        print(f"$ pahaw {' '.join(argv)}", flush=True)
        code = cli(argv)
        if code not in (0, 3):
            return code

    ledger = json.loads((data / "ledger.json").read_text())
    injected = {f: v["effect_sd"] for f, v in ledger["families"].items() if v["effect_sd"]}
    report = EvalReport.from_json((out / "report.json").read_text())
    print(f"\ninjected effects (sd units): {injected or 'none'}")
    for e in report.entries:
        if e.scope == "overall" and e.status == "ok":
            print(f"  {e.feature_set:9s} {e.classifier:8s} accuracy {100 * e.accuracy:5.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(run(parse_args()))

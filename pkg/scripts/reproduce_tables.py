"""Run the published evaluation layout on a real handwriting cohort.

Extracts features for all eight tasks, ranks them, then evaluates every
feature set and classifier in both protocol modes.  The non-nested mode
selects features and tunes the SVM on all subjects before cross-validation,
which is optimistic; the nested mode repeats both steps inside each
training fold.  Results land in ``<out>/<mode>/``.

Example:
    python scripts/reproduce_tables.py --data-root /data/pahaw --out runs/real
"""

from __future__ import annotations

import argparse
import shutil
import sys
import time
from pathlib import Path

from pahaw.cli import main as cli


def parse_args(argv=None) -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data-root", required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--grid", choices=("full", "reduced"), default="full")
    p.add_argument("--modes", nargs="+", default=["paper-faithful", "nested"])
    p.add_argument("--device-scale", type=float, default=None, help="millimetres per device unit")
    return p.parse_args(argv)


def run(args: argparse.Namespace) -> int:
    features = args.out / "features"
    extract = ["extract", "--data-root", args.data_root, "--out", str(features)]
    if args.device_scale is not None:
        extract += ["--device-scale", str(args.device_scale)]
    code = cli(extract)
    if code:
        return code
    cli(["rank", "--out", str(features), "--features", "all", "--top", "20"])

    for mode in args.modes:
        target = args.out / mode
        target.mkdir(parents=True, exist_ok=True)
        for f in features.glob("*.csv"):
            if not f.name.startswith("ranking_"):
                shutil.copy(f, target / f.name)
                shutil.copy(f.with_suffix(".json"), target / f.with_suffix(".json").name)
        start = time.perf_counter()
        code = cli(["evaluate", "--out", str(target), "--seed", str(args.seed), "--mode", mode,
                    "--features", "all", "--classifier", "all", "--repeats", str(args.repeats), "--grid", args.grid])
        print(f"[{mode}] finished in {(time.perf_counter() - start) / 60:.1f} min (exit {code})\n")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run(parse_args()))

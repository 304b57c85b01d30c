#!/usr/bin/env python3
"""Transition feasibility study: success rate vs lattice side and margin.

Writes a plot-ready CSV (side, check_margin, trials, successes, rate,
ci_low, ci_high) and prints the table.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from holoraft.geometry import ModuleGeometry, build_regions
from holoraft.montecarlo import transition_success_stats


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sides", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--margins", type=float, nargs="+", default=[0.0, 0.1])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/transition_study.csv")
    args = ap.parse_args()

    regions = build_regions(ModuleGeometry(), 0.1)
    rows = ["side,check_margin,trials,successes,rate,ci_low,ci_high"]
    for margin in args.margins:
        for side in args.sides:
            stats = transition_success_stats(
                side, args.trials, regions, seed=args.seed,
                check_margin=margin)
            lo, hi = stats.wilson_interval()
            rows.append(f"{side},{margin!r},{stats.trials},{stats.successes},"
                        f"{stats.rate!r},{lo!r},{hi!r}")
            print(f"side {side} margin {margin:.2f}: "
                  f"rate {stats.rate:.4f} [{lo:.4f}, {hi:.4f}]")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(rows) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Remaining-life accuracy vs relaxation observation length.

Repeats the regression with each relaxation transient truncated to fewer
samples (shorter rest observation) and prints RMSE against the sampling
time budget.
"""

import argparse
import sys

from batlife import simgen
from batlife.dataset import split_dataset
from batlife.experiments import RulExperimentConfig, run_truncation_sweep
from batlife.features import FeatureSet


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cells", type=int, default=4, help="cells per condition (count; fleets below ~4 underdetermine the learners)")
    parser.add_argument("--seed", type=int, default=13, help="fleet seed (integer)")
    parser.add_argument("--noise-mv", type=float, default=0.2,
                        help="relaxation noise sigma (millivolts)")
    parser.add_argument("--counts", default="6,8,12,full",
                        help="comma list of retained sample counts")
    parser.add_argument("--out", help="report directory (path, optional)")
    args = parser.parse_args()

    cells = simgen.benchmark_fleet(seed=args.seed, cells_per_condition=args.cells,
                                   noise_sigma_v=args.noise_mv * 1e-3)
    spec = {cond: ((args.cells + 1) // 2, args.cells // 2)
            for cond in sorted({c.condition for c in cells})}
    split = split_dataset(cells, spec, seed=3)
    counts = [None if tok.strip() == "full" else int(tok)
              for tok in args.counts.split(",")]
    config = RulExperimentConfig(
        feature_sets=(FeatureSet.NOVEL_PRED, FeatureSet.BENCHMARK),
        stride=12, seed=0, restarts=4, max_iters=400,
    )
    report = run_truncation_sweep(cells, split, config, counts)

    print(f"{'feature set':12s} {'samples':>8s} {'time (min)':>11s} {'RMSE':>8s} {'MAPE %':>8s}")
    for row in report.tables["sweep"]:
        print(f"{row['feature_set']:12s} {row['relax_samples']:8d} "
              f"{row['relaxation_time_s'] / 60.0:11.1f} {row['rmse_cycles']:8.2f} "
              f"{row['mape_pct']:8.2f}")
    if args.out:
        report.write(args.out)
        print(f"report written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

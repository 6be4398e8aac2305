#!/usr/bin/env python3
"""Spread of the remaining-life benchmark across fleet and split seeds.

The library guarantees determinism per seed, not significance across
seeds; this wrapper quantifies the seed-to-seed spread.
"""

import argparse
import sys

import numpy as np

from batlife import simgen
from batlife.dataset import split_dataset
from batlife.experiments import RulExperimentConfig, run_rul_experiment
from batlife.features import FeatureSet


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0,1,2,3,4", help="comma list of split seeds")
    parser.add_argument("--cells", type=int, default=5, help="cells per condition (count; fleets below ~4 underdetermine the learners)")
    parser.add_argument("--fleet-seed", type=int, default=7, help="fleet seed (integer)")
    args = parser.parse_args()

    cells = simgen.benchmark_fleet(seed=args.fleet_seed, cells_per_condition=args.cells)
    spec = {cond: ((args.cells + 1) // 2, args.cells // 2)
            for cond in sorted({c.condition for c in cells})}
    config = RulExperimentConfig(
        feature_sets=(FeatureSet.NOVEL_PRED, FeatureSet.ECM), stride=10, seed=0,
    )

    results: dict[str, list[float]] = {}
    for seed in (int(tok) for tok in args.seeds.split(",")):
        split = split_dataset(cells, spec, seed=seed)
        report = run_rul_experiment(cells, split, config)
        for row in report.tables["metrics"]:
            if row["chemistry"] == "ALL" and row["condition"] == "ALL":
                results.setdefault(row["feature_set"], []).append(row["rmse_cycles"])
        printable = {k: round(v[-1], 2) for k, v in results.items()}
        print(f"split seed {seed}: {printable}")

    print("\nacross seeds (RMSE cycles):")
    for feature_set, values in results.items():
        arr = np.array(values)
        print(f"  {feature_set:12s} mean {arr.mean():6.2f}  sd {arr.std(ddof=1):5.2f}  "
              f"range [{arr.min():.2f}, {arr.max():.2f}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())

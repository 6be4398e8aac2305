#!/usr/bin/env python3
"""Three-way life classification benchmark on the synthetic fleet.

Trains the classifier DAG on an aging-stage window around a test cycle and
prints per-condition accuracy for each feature set.
"""

import argparse
import sys

from batlife import simgen
from batlife.dataset import Chemistry, split_dataset
from batlife.experiments import ClassificationConfig, run_classification_experiment
from batlife.features import FeatureSet


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cells", type=int, default=5, help="cells per condition (count; fleets below ~4 underdetermine the learners)")
    parser.add_argument("--seed", type=int, default=21, help="fleet seed (integer)")
    parser.add_argument("--test-cycle", type=int, default=60,
                        help="aging-stage window center (cycle)")
    parser.add_argument("--window", type=int, default=40,
                        help="aging-stage window width (cycles)")
    parser.add_argument("--out", help="report directory (path, optional)")
    args = parser.parse_args()

    cells = simgen.benchmark_fleet(
        seed=args.seed, cells_per_condition=args.cells,
        fade_refs=(150.0, 400.0, 1000.0), temperatures=(25, 35, 45),
    )
    spec = {cond: ((args.cells + 1) // 2, args.cells // 2)
            for cond in sorted({c.condition for c in cells})}
    split = split_dataset(cells, spec, seed=5)
    config = ClassificationConfig(
        feature_sets=(FeatureSet.ECM, FeatureSet.RATE_CLASS, FeatureSet.BENCHMARK,
                      FeatureSet.NOVEL_CLASS),
        chemistry=Chemistry.NCA,
        test_cycle=args.test_cycle, window_cycles=args.window,
        stride=1, seed=0,
    )
    report = run_classification_experiment(cells, split, config)

    print(f"{'feature set':12s} {'condition':12s} {'n':>5s} {'accuracy %':>11s}")
    for row in report.tables["metrics"]:
        print(f"{row['feature_set']:12s} {row['condition']:12s} "
              f"{row['n_samples']:5d} {row['accuracy_pct']:11.2f}")
    if args.out:
        report.write(args.out)
        print(f"report written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Normalized network cost of each caching mode against the no-cache run.

Usage: python scripts/compare_baselines.py [--config configs/desk.cfg]
       [--w-backhaul 1.0] [--w-power 1.0]

The backhaul term is driven by realized requests; use a few dozen
realizations in the config for a stable ordering between modes.
"""

import argparse
import dataclasses
import os
import sys
import warnings

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from mecopt import evaluation as ev  # noqa: E402


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default="configs/desk.cfg")
    parser.add_argument("--w-backhaul", type=float, default=1.0)
    parser.add_argument("--w-power", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    cfg = ev.ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    weights = (args.w_backhaul, args.w_power)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base_run = ev.mixed_timescale_solve(
            dataclasses.replace(cfg, caching_mode="none"))
        baseline = ev.network_cost(base_run.metrics["mean_fetched_bits"],
                                   base_run.metrics["mean_tx_power_w"],
                                   weights)
        print(f"no-cache baseline cost: {baseline:.4f}")
        for mode in ("random", "greedy", "knapsack", "sca"):
            run = ev.mixed_timescale_solve(
                dataclasses.replace(cfg, caching_mode=mode))
            cost = ev.network_cost(run.metrics["mean_fetched_bits"],
                                   run.metrics["mean_tx_power_w"], weights,
                                   baseline_cost=baseline)
            print(f"{mode:>9}: normalized cost {cost:.4f}, "
                  f"savings {run.metrics['mean_savings']:.3f}, "
                  f"throughput {run.metrics['mean_throughput']:.2f}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Run every sweep axis on one config and drop the CSVs in one directory.

Usage: python scripts/make_all_sweeps.py [--config configs/desk.cfg]
       [--out results] [--seed N]

The output directory then feeds the figure pipeline
(`figures/make_all results figures/out`).
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
    parser.add_argument("--out", default="results")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    cfg = ev.ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for axis in ev.SWEEP_AXES:
            result = ev.run_sweep(cfg, axis)
            path = os.path.join(args.out, f"sweep_{axis}.csv")
            ev.write_sweep_csv(result, path)
            print(f"{axis:>6}: {len(result.rows)} points, "
                  f"{result.wall_time_s:.1f}s -> {path}")
    ev.write_manifest(cfg, os.path.join(args.out, "manifest.json"))


if __name__ == "__main__":
    main()

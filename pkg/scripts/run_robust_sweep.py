#!/usr/bin/env python3
"""Robust designs vs warden-CSI uncertainty radius (nested-ball instances)."""

import argparse

from covert_isac.harness import ExperimentSpec, run_experiment, write_rows
from covert_isac.model import default_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("--eps", type=float, default=0.001)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="robust_sweep.csv")
    args = ap.parse_args()

    cfg = default_config(
        mt=16, mr=16, u_carols=2, n_rf=6, covert_eps=args.eps, rng_seed=args.seed
    )
    spec = ExperimentSpec(
        sweep_variable="deltaSq",
        sweep_values=(0.01, 0.1, 1.0),
        schemes=("RobustFDBF", "RobustHBF"),
        trials=args.trials,
        base_config=cfg,
    )
    rows = run_experiment(spec)
    write_rows(rows, args.out, "csv")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()

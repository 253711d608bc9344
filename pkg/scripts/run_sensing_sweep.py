#!/usr/bin/env python3
"""Sensing-floor sweep: where do the fixed precoders stop working?"""

import argparse

from covert_isac.harness import ExperimentSpec, run_experiment, write_rows
from covert_isac.model import default_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default="gamma_sweep.csv")
    args = ap.parse_args()

    cfg = default_config(mt=16, mr=16, u_carols=4, n_rf=6, rng_seed=args.seed)
    spec = ExperimentSpec(
        sweep_variable="gamma",
        sweep_values=(4.0, 6.0, 8.0, 10.0, 11.0, 12.0),
        schemes=("FDBF", "HBF", "ZF", "MRT"),
        trials=args.trials,
        base_config=cfg,
        workers=args.workers,
    )
    rows = run_experiment(spec)
    write_rows(rows, args.out, "csv")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()

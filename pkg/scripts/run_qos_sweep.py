#!/usr/bin/env python3
"""Desk-scale rate-vs-QoS sweep over the proposed and fixed-precoder schemes."""

import argparse

from covert_isac.harness import ExperimentSpec, run_experiment, write_rows
from covert_isac.model import default_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default="qos_sweep.csv")
    args = ap.parse_args()

    cfg = default_config(mt=16, mr=16, u_carols=2, n_rf=6, rng_seed=args.seed)
    spec = ExperimentSpec(
        sweep_variable="qos",
        sweep_values=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0),
        schemes=("FDBF", "HBF", "ZF", "MRT", "CommOnlyFD"),
        trials=args.trials,
        base_config=cfg,
        workers=args.workers,
    )
    rows = run_experiment(spec)
    write_rows(rows, args.out, "csv")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()

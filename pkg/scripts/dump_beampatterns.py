#!/usr/bin/env python3
"""Beampattern dumps: one file per clutter-power level (notch-depth study)."""

import argparse

from covert_isac.harness import emit_beampattern
from covert_isac.model import default_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scheme", default="FDBF")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--prefix", default="pattern")
    args = ap.parse_args()

    cfg = default_config(mt=16, mr=16, u_carols=4, n_rf=6, rng_seed=args.seed)
    for clutter_db in (0.0, 20.0, 40.0):
        out = f"{args.prefix}_clutter{int(clutter_db)}dB.csv"
        emit_beampattern(args.scheme, cfg, out, seed=args.seed, clutter_db=clutter_db)
        print(f"wrote {out}")


if __name__ == "__main__":
    main()

"""Command-line entry points for sweeps and beampattern dumps."""

from __future__ import annotations

import argparse
import sys

from .harness import (
    SCHEME_NAMES,
    SWEEP_VARIABLES,
    ExperimentSpec,
    emit_beampattern,
    parse_config_file,
    run_experiment,
    write_rows,
)
from .model import default_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covert-isac",
        description="Beamformer design sweeps for the covert-transmission ISAC simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a parameter sweep over schemes")
    sweep.add_argument("--config", help="flat key=value file with scenario overrides")
    sweep.add_argument("--sweep", required=True, choices=SWEEP_VARIABLES)
    sweep.add_argument("--values", required=True, help="comma-separated sweep values")
    sweep.add_argument(
        "--schemes", required=True, help=f"comma-separated subset of {','.join(SCHEME_NAMES)}"
    )
    sweep.add_argument("--trials", type=int, default=20)
    sweep.add_argument("--seed", type=int, default=None, help="overrides rng_seed")
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.add_argument("--workers", type=int, default=1)

    pat = sub.add_parser("beampattern", help="dump the angular response of one design")
    pat.add_argument("--config", help="flat key=value file with scenario overrides")
    pat.add_argument("--scheme", required=True, choices=SCHEME_NAMES)
    pat.add_argument("--seed", type=int, default=None)
    pat.add_argument("--clutter-db", type=float, default=None)
    pat.add_argument("--out", required=True)
    return parser


def _config_from(args) -> dict:
    overrides: dict = {}
    if args.config:
        raw = parse_config_file(args.config)
        overrides.update({k: v for k, v in raw.items() if not isinstance(v, str)})
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    return overrides


def main(argv: list | None = None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = default_config(**_config_from(args))

    if args.command == "sweep":
        values = tuple(float(v) for v in args.values.split(","))
        schemes = tuple(s.strip() for s in args.schemes.split(","))
        spec = ExperimentSpec(
            sweep_variable=args.sweep,
            sweep_values=values,
            schemes=schemes,
            trials=args.trials,
            base_config=cfg,
            output_path=args.out,
            out_format=args.format,
            workers=args.workers,
        )
        rows = run_experiment(spec)
        write_rows(rows, spec.output_path, spec.out_format)
        print(f"wrote {len(rows)} rows to {spec.output_path}")
        return 0

    if args.command == "beampattern":
        emit_beampattern(args.scheme, cfg, args.out, seed=args.seed, clutter_db=args.clutter_db)
        print(f"wrote beampattern to {args.out}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())

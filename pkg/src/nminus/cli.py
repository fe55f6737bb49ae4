"""Command-line entry point; one verb per experiment kind.

Example:
    nminus verify-mv --out reports/ --seed 0
    nminus count-lattice --config cfg.json --no-timestamp
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import EXPERIMENT_KINDS, ExperimentConfig, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nminus",
        description=(
            "Count negative eigenvalues of 2D Schrodinger operators "
            "(lattice, unit-grid metric graph, plane) and check the "
            "eigenvalue-bound functionals against the counts."
        ),
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--out", help="output directory for CSV + JSON reports")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--jobs", type=int, help="worker threads for suite instances")
        p.add_argument(
            "--no-timestamp",
            action="store_true",
            help="suppress the timestamp header line in CSV output",
        )
        p.add_argument(
            "--alpha",
            type=float,
            action="append",
            dest="alphas",
            help="coupling value (repeatable; overrides config)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            print(f"error: cannot read config {args.config}: {err}", file=sys.stderr)
            return 2
    raw["experiment"] = args.experiment
    if args.out is not None:
        raw["out"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    if args.no_timestamp:
        raw["timestamp"] = False
    if args.alphas:
        raw["alphas"] = args.alphas
    result = run(raw)
    if "error" in result.summary:
        print(f"error: {result.summary['error']}", file=sys.stderr)
        return result.exit_code
    print(json.dumps(result.summary, indent=2, sort_keys=True, default=str))
    if result.csv_path:
        print(f"rows written to {result.csv_path}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())

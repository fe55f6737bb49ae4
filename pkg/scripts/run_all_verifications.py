#!/usr/bin/env python3
"""Run every verification experiment at desk scale and write reports.

Usage:
    python scripts/run_all_verifications.py [outdir] [--jobs N] [--seed N]

Writes one CSV + JSON summary per experiment into the output directory
(default reports/) and prints a one-line verdict per experiment.  Exits
nonzero if any asserted inequality failed.
"""

import argparse
import sys
import time
from pathlib import Path

from nminus.experiments import run

EXPERIMENTS = [
    {"experiment": "verify-mv"},
    {"experiment": "verify-mz94"},
    {"experiment": "verify-sharg"},
    {"experiment": "verify-decoupling"},
    {"experiment": "verify-carryover"},
    {"experiment": "hardy-scan"},
    {
        "experiment": "alpha-scan",
        "alphas": [float(2**k) for k in range(11)],
        "potential": {
            "kind": "random-box",
            "params": {"half_width": 3, "count": 5},
            "seed": 1,
        },
    },
]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("outdir", nargs="?", default="reports")
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    Path(args.outdir).mkdir(parents=True, exist_ok=True)
    worst = 0
    for base in EXPERIMENTS:
        cfg = dict(base, out=args.outdir, jobs=args.jobs)
        cfg.setdefault("seed", args.seed)
        t0 = time.time()
        res = run(cfg)
        verdict = "ok" if res.exit_code == 0 else "FAILED"
        extras = []
        if "fitted_constant" in res.summary:
            extras.append(f"C={res.summary['fitted_constant']:.5g}")
        if "failures" in res.summary:
            extras.append(f"failures={res.summary['failures']}")
        if "lattice_infimum_estimate" in res.summary:
            extras.append(f"min_ratio={res.summary['lattice_infimum_estimate']:.4g}")
        print(
            f"{base['experiment']:<20} {verdict:<7} {time.time() - t0:6.1f}s  "
            + " ".join(extras)
        )
        worst = max(worst, res.exit_code)
    return worst


if __name__ == "__main__":
    sys.exit(main())

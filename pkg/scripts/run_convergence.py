"""Median d_H and d_mu against S for growing horizons T in {1e3, 1e4, 1e5} steps.

    python3 scripts/run_convergence.py --out results/convergence
"""

import argparse
import sys

from homerange.cli import main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/convergence")
    ap.add_argument("--reps", type=int, default=10)
    args = ap.parse_args(argv)
    return main(["experiment", "--table", "convergence", "--reps", str(args.reps), "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())

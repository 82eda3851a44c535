"""Regenerate the replication tables.

Default is the quick check cell; --full runs all 27 cells x 50 reps x 1e5 steps.

    python3 scripts/run_tables.py --out results/quick
    python3 scripts/run_tables.py --full --out results/full
"""

import argparse
import sys

from homerange.cli import main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/tables")
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--tables", default="hausdorff,measure")
    args = ap.parse_args(argv)
    for table in args.tables.split(","):
        cmd = ["experiment", "--table", table, "--out", f"{args.out}/{table}", "--workers", str(args.workers)]
        if args.full:
            cmd.append("--full")
        else:
            cell = "0.002:100:500" if table == "hausdorff" else "0.003:500:100"
            cmd += ["--cells", cell, "--reps", "10"]
        code = main(cmd)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())

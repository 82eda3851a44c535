"""Write the synthetic stand-in track used by the ingest example.

1,577 positions of a reflected path on the study set, thinned every 20 steps
and mapped to projected-metre-like coordinates so that ``--rescale`` has
something to undo.
"""

import argparse
from pathlib import Path

from homerange.geometry import study_domain
from homerange.simulator import SimParams, simulate

N_POINTS = 1577
THIN = 20
SCALE_M = 4000.0
OFFSET_M = (512_000.0, 7_420_000.0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "elephant_standin.csv"))
    ap.add_argument("--seed", type=int, default=1577)
    args = ap.parse_args(argv)
    traj = simulate(SimParams(study_domain(), 0.01, N_POINTS * THIN, seed=args.seed))
    pts = traj.points[::THIN]
    lines = [f"# synthetic stand-in: seed={args.seed} h=0.01 thin={THIN} scale_m={SCALE_M}", "time,x,y"]
    for k, (x, y) in enumerate(pts):
        t = k * 3600.0  # hourly fixes
        lines.append(f"{t:.1f},{OFFSET_M[0] + SCALE_M * x:.3f},{OFFSET_M[1] + SCALE_M * y:.3f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(pts)} fixes to {out}")


if __name__ == "__main__":
    main()

"""``homerange`` command line.

Exit status: 0 on success, 1 on invalid input or usage, 2 on runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time


from . import bounds as bnd
from . import experiments as exps
from . import io as hio
from .density import KernelSpec, drift_estimate, kde, level_set_contours, mass_quantile_level, true_density
from .geometry import Grid2D, domain_from_spec, rasterize, study_domain
from .setestim import distance_in_measure, hausdorff, rconvex_hull
from .simulator import (
    DRIFT_POTENTIAL,
    OnOffSchedule,
    SimParams,
    apply_schedule,
    endpoint_subsample,
    flag_schedule,
    simulate,
)

log = logging.getLogger("homerange")

SUBCOMMANDS = ("simulate", "schedule", "hull", "distances", "density", "levelsets", "drift", "bounds", "advise",
               "experiment", "ingest")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p):
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: config output_dir, $HOMERANGE_OUT, ./out)")
    p.add_argument("--reps", type=int)
    p.add_argument("--steps", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="homerange", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a reflected path and write its CSV")
    _common(p)
    p.add_argument("--h", type=float)

    p = sub.add_parser("schedule", help="apply an on-off schedule to a trajectory CSV")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--delta1", type=int)
    p.add_argument("--delta2", type=int)

    for name, hlp in (("hull", "r-convex hull of a track"), ("distances", "d_H and d_mu of a track against the domain")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--input")
        p.add_argument("--r", type=float)
        p.add_argument("--spacing", type=float)
        p.add_argument("--on-only", action="store_true", help="use only rows flagged on")

    for name in ("density", "levelsets", "drift"):
        p = sub.add_parser(name, help=f"{name} from a track (or the true study density with --true)")
        _common(p)
        p.add_argument("--input")
        p.add_argument("--bandwidth", type=float)
        p.add_argument("--kernel", choices=["gaussian", "epanechnikov"])
        p.add_argument("--spacing", type=float)
        p.add_argument("--subsample", choices=["all", "on", "endpoints"], default="on")
        p.add_argument("--true", action="store_true", help="use the closed-form stationary density")
        if name == "levelsets":
            p.add_argument("--levels", type=float, nargs="+")
            p.add_argument("--mass", type=float, nargs="+", help="levels given as upper-set mass fractions")
        if name == "drift":
            p.add_argument("--points", help="probe points 'x,y;x,y;...'")

    p = sub.add_parser("bounds", help="probability bounds for given schedule parameters")
    _common(p)
    _bound_args(p)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--delta1", type=float, required=True)
    p.add_argument("--delta2", type=float, default=0.0)

    p = sub.add_parser("advise", help="choose (delta1, p) for a battery budget")
    _common(p)
    _bound_args(p)
    p.add_argument("--battery", type=float, required=True)
    p.add_argument("--p-max", type=int, required=True)
    p.add_argument("--delta2", type=float, default=0.0)

    p = sub.add_parser("experiment", help="replication tables and convergence diagnostic")
    _common(p)
    p.add_argument("--table", choices=["hausdorff", "measure", "convergence"], required=True)
    p.add_argument("--full", action="store_true", help="27 cells x 50 reps x 1e5 steps (long)")
    p.add_argument("--cells", help="restrict to cells 'h:d1:d2,h:d1:d2'")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("ingest", help="ingest a track CSV, optionally rescale, hull and render it")
    _common(p)
    p.add_argument("--input", required=False)
    p.add_argument("--rescale", action="store_true", help="affine rescale to unit diameter")
    p.add_argument("--r", type=float)
    p.add_argument("--spacing", type=float)
    return ap


def _bound_args(p):
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--c", type=float, default=None, help="inf of the stationary density on S")
    p.add_argument("--muS", type=float, default=None)
    p.add_argument("--d", type=int, default=2)


# --------------------------------------------------------------------------


def _domain(cfg):
    return domain_from_spec(cfg["domain"]) if cfg.get("domain") else study_domain()


def _sim_params(args, cfg) -> SimParams:
    s = cfg.get("simulation", {})
    steps = args.steps or s.get("n_steps", 10_000)
    seed = args.seed if args.seed is not None else s.get("seed", 0)
    h = getattr(args, "h", None) or s.get("h", 0.01)
    return SimParams(_domain(cfg), h, int(steps), tuple(s.get("start", (0.0, -0.5))), s.get("drift", "linear"), int(seed))


def _schedule(cfg, h=None, d1=None, d2=None):
    s = cfg.get("schedule", {})
    d1 = d1 if d1 is not None else s.get("delta1_steps")
    if d1 is None:
        return None
    d2 = d2 if d2 is not None else s.get("delta2_steps", 0)
    return OnOffSchedule(int(d1), int(d2), h)


def _est(cfg, key, default):
    return cfg.get("estimators", {}).get(key, default)


def _track(args, cfg):
    path = getattr(args, "input", None) or cfg.get("input")
    if path:
        return hio.ingest_track(path)
    return simulate(_sim_params(args, cfg))


def cmd_simulate(args, cfg, out):
    params = _sim_params(args, cfg)
    traj = simulate(params)
    sched = _schedule(cfg, params.h)
    if sched:
        traj = flag_schedule(traj, sched)
    path = hio.write_trajectory(traj, out / "trajectory.csv")
    hio.emit_svg(traj, out / "trajectory.svg")
    hio.write_json(exps.manifest(command="simulate", seed=params.seed, h=params.h, n_steps=params.n_steps,
                                 rng=traj.meta["rng"], domain=params.domain.name), out / "manifest.json")
    return f"simulated {len(traj)} steps (seed {params.seed}, {traj.meta['n_rejected']} rejections) -> {path}"


def cmd_schedule(args, cfg, out):
    traj = _track(args, cfg)
    sched = _schedule(cfg, None, args.delta1, args.delta2)
    if sched is None:
        raise ValueError("schedule needs --delta1 or a config 'schedule' section")
    on = apply_schedule(flag_schedule(traj, sched), sched)
    hio.write_trajectory(on, out / "trajectory_on.csv")
    hio.emit_svg(flag_schedule(traj, sched), out / "schedule.svg")
    return f"kept {len(on)} of {len(traj)} points -> {out / 'trajectory_on.csv'}"


def _hull_inputs(args, cfg, default_r):
    traj = _track(args, cfg)
    pts = traj.points[traj.on_flags] if args.on_only else traj.points
    r = args.r or _est(cfg, "r", default_r)
    spacing = args.spacing or _est(cfg, "spacing", 0.005)
    return traj, pts, r, spacing


def cmd_hull(args, cfg, out):
    traj, pts, r, spacing = _hull_inputs(args, cfg, 0.4)
    lo, hi = pts.min(0), pts.max(0)
    grid = Grid2D.covering((*lo, *hi), spacing, pad=2 * r + 2 * spacing)
    hull = rconvex_hull(pts, r, grid)
    hio.write_mask(hull.mask, out / "hull_mask.txt")
    (out / "hull_boundary.csv").write_text(hio.polylines_to_csv(hull.boundary))
    hio.emit_svg(hull.boundary, out / "hull.svg", points=pts)
    return f"r={r} hull of {len(pts)} points: area {hull.mask.count * spacing ** 2:.6g}, {len(hull.boundary)} loops"


def cmd_distances(args, cfg, out):
    traj, pts, r, spacing = _hull_inputs(args, cfg, 0.4)
    dom = _domain(cfg)
    grid = Grid2D.covering(dom.bbox, spacing, pad=2 * r + 2 * spacing)
    lo, hi = pts.min(0), pts.max(0)
    if not grid.covers((lo[0] - 2 * r, lo[1] - 2 * r, hi[0] + 2 * r, hi[1] + 2 * r)):
        raise ValueError("track leaves the domain's bounding box")
    Smask = rasterize(dom, grid)
    hull = rconvex_hull(pts, r, grid).mask
    res = {"n_points": len(pts), "r": r, "spacing": spacing, "dH_points": hausdorff(pts, Smask),
           "dH_hull": hausdorff(hull, Smask), "dmu_hull": distance_in_measure(hull, Smask)}
    hio.write_json(res, out / "distances.json")
    return f"d_H(points,S)={res['dH_points']:.4f} d_H(hull,S)={res['dH_hull']:.4f} d_mu(hull,S)={res['dmu_hull']:.4f}"


def _density(args, cfg):
    spacing = args.spacing or _est(cfg, "spacing", 0.02)
    if args.true:
        dom = _domain(cfg)
        grid = Grid2D.covering(dom.bbox, spacing, pad=2 * spacing)
        drift = cfg.get("simulation", {}).get("drift", "linear")
        return true_density(dom, DRIFT_POTENTIAL[drift], grid), None
    traj = _track(args, cfg)
    sched = _schedule(cfg, None)
    if args.subsample == "endpoints":
        if sched is None:
            raise ValueError("endpoint subsample needs a schedule in the config")
        pts = endpoint_subsample(traj, sched, sched.windows_within(len(traj)))
    elif args.subsample == "on":
        pts = traj.points[traj.on_flags] if sched is None else apply_schedule(traj, sched).points
    else:
        pts = traj.points
    ker = KernelSpec(args.kernel or _est(cfg, "kernel", "gaussian"), args.bandwidth or _est(cfg, "bandwidth", 0.2))
    lo, hi = pts.min(0), pts.max(0)
    grid = Grid2D.covering((*lo, *hi), spacing, pad=3 * ker.bandwidth)
    return kde(pts, ker, grid), pts


def cmd_density(args, cfg, out):
    field, pts = _density(args, cfg)
    (out / "density.csv").write_text(hio.density_to_csv(field))
    hio.emit_svg(field, out / "density.svg")
    return f"density on {field.grid.nx}x{field.grid.ny} grid ({field.provenance['kind']}), mass {field.mass():.4f}"


def cmd_levelsets(args, cfg, out):
    field, _ = _density(args, cfg)
    levels = list(args.levels or _est(cfg, "levels", []))
    levels += [mass_quantile_level(field, m) for m in (args.mass or [])]
    if not levels:
        levels = [mass_quantile_level(field, 0.5)]
    all_loops, summary = [], []
    for lam in levels:
        loops = level_set_contours(field, lam)
        all_loops += loops
        summary.append({"level": lam, "loops": len(loops)})
    (out / "levelsets.csv").write_text(hio.polylines_to_csv(all_loops))
    hio.write_json(summary, out / "levelsets.json")
    hio.emit_svg(field, out / "levelsets.svg", polylines=all_loops)
    return f"{len(levels)} level(s), {len(all_loops)} contour loop(s)"


def cmd_drift(args, cfg, out):
    field, _ = _density(args, cfg)
    if args.points:
        probes = [tuple(float(v) for v in p.split(",")) for p in args.points.split(";") if p.strip()]
    else:
        probes = [(0.0, -0.5), (-0.5, 0.0), (0.0, 0.5)]
    rows = []
    for q in probes:
        try:
            v = drift_estimate(field, q).tolist()
            rows.append({"x": q[0], "y": q[1], "drift": v})
        except ValueError as exc:
            rows.append({"x": q[0], "y": q[1], "error": str(exc)})
    hio.write_json(rows, out / "drift.json")
    return f"drift at {len(rows)} probe(s) -> {out / 'drift.json'}"


def _erg_params(args):
    c = args.c
    mu = args.muS
    if c is None or mu is None:
        dom = study_domain()
        grid = Grid2D.covering(dom.bbox, 0.005, pad=0.01)
        g = true_density(dom, "quadratic", grid)
        c = c if c is not None else float(g.values[g.values > 0].min())
        mu = mu if mu is not None else rasterize(dom, grid).count * 0.005**2
    return bnd.ErgodicityParams(args.alpha, args.beta, c, mu, args.d)


def cmd_bounds(args, cfg, out):
    rep = bnd.bound_report(args.epsilon, args.p, args.delta1, args.delta2, _erg_params(args))
    data = rep.to_dict()
    hio.write_json(data, out / "bounds.json")
    return (f"bound_contiguous={rep.bound_contiguous_raw:.6g} (raw) bound_onoff={rep.bound_onoff_raw:.6g} (raw) "
            f"feasible={rep.feasible}")


def cmd_advise(args, cfg, out):
    adv = bnd.advise_schedule(args.battery, args.epsilon, _erg_params(args), args.p_max, args.delta2)
    data = {"delta1": adv.delta1, "p": adv.p, "report": adv.report.to_dict() if adv.report else None}
    hio.write_json(data, out / "advice.json")
    return f"p={adv.p} delta1={adv.delta1:.6g}"


def _grid_from(args, cfg) -> exps.ExperimentGrid:
    e = dict(cfg.get("experiment", {}))
    if args.full:
        e.update(reps=50, n_steps=100_000)
    if args.reps:
        e["reps"] = args.reps
    if args.steps:
        e["n_steps"] = args.steps
    if args.seed is not None:
        e["master_seed"] = args.seed
    workers = args.workers or int(os.environ.get("HOMERANGE_THREADS", "1"))
    e["workers"] = workers
    grid = exps.ExperimentGrid(**e)
    if args.cells:
        cells = [tuple(c.split(":")) for c in args.cells.split(",")]
        grid.h_values = sorted({float(c[0]) for c in cells})
        grid.delta1_steps = sorted({int(c[1]) for c in cells})
        grid.delta2_steps = sorted({int(c[2]) for c in cells})
    return grid


def cmd_experiment(args, cfg, out):
    t0 = time.time()
    if args.table == "convergence":
        e = cfg.get("experiment", {})
        res = exps.run_convergence_diagnostic(e.get("T_list", [1_000, 10_000, 100_000]), args.reps or e.get("reps", 10),
                                              master_seed=args.seed if args.seed is not None else e.get("master_seed", 20240601))
        hio.write_json(res, out / "convergence.json")
        hio.write_json(exps.manifest(command="experiment convergence", wall_clock_s=time.time() - t0), out / "manifest.json")
        meds = [f"{r['median_dH_points']:.4f}" for r in res["rows"]]
        return f"convergence medians d_H(points): {' '.join(meds)}"
    grid = _grid_from(args, cfg)
    metric = "dH" if args.table == "hausdorff" else "dmu"
    tables = exps.run_grid(grid, (metric,))
    on, cont = tables[f"{metric}_onoff"], tables[f"{metric}_contiguous"]
    gain = exps.efficiency_gain(on, cont)
    for t in (on, cont, gain):
        (out / f"{t.metric}.csv").write_text(t.to_csv())
        hio.write_json(t.to_json(), out / f"{t.metric}.json")
    hio.write_json(exps.manifest(grid, command=f"experiment {args.table}", wall_clock_s=time.time() - t0),
                   out / "manifest.json")
    return f"{len(on.cells)} cells x {grid.reps} reps -> {out}"


def cmd_ingest(args, cfg, out):
    path = args.input or cfg.get("input")
    if not path:
        raise ValueError("ingest needs --input or config 'input'")
    traj = hio.ingest_track(path)
    pts = traj.points
    meta = {}
    if args.rescale:
        pts, meta = hio.rescale_unit_diameter(pts)
        traj = type(traj)(pts, traj.times, traj.on_flags, {**traj.meta, "rescale_scale": meta["scale"]}, traj.steps)
    hio.write_trajectory(traj, out / "track.csv")
    r = args.r or _est(cfg, "r", 0.02 if args.rescale else 0.4)
    spacing = args.spacing or _est(cfg, "spacing", min(0.005, r / 4))
    lo, hi = pts.min(0), pts.max(0)
    grid = Grid2D.covering((*lo, *hi), spacing, pad=2 * r + 2 * spacing)
    hull = rconvex_hull(pts[traj.on_flags], r, grid)
    (out / "hull_boundary.csv").write_text(hio.polylines_to_csv(hull.boundary))
    hio.emit_svg(traj, out / "track.svg", extra_polylines=hull.boundary)
    hio.write_json({"n_points": len(traj), "r": r, "spacing": spacing, **meta,
                    "hull_area": hull.mask.count * spacing**2, "loops": len(hull.boundary)}, out / "ingest.json")
    return f"ingested {len(traj)} points; r={r} hull has {len(hull.boundary)} loop(s)"


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HOMERANGE_LOGLEVEL", "WARNING"))
    try:
        args = build_parser().parse_args(argv)
        cfg = hio.load_config(args.config) if args.config else {}
        out = hio.output_dir(args.out, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        msg = COMMANDS[args.command](args, cfg, out)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("runtime failure")
        print(f"failure: {exc}", file=sys.stderr)
        return 2
    print(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())

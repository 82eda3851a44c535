"""Replication harness for the on-off vs contiguous comparison tables."""

from __future__ import annotations

import itertools
import logging
import os
import platform
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import __version__
from .bounds import rate_curve
from .geometry import GeometryError, Grid2D, rasterize, study_domain
from .setestim import distance_in_measure, hausdorff, rconvex_hull
from .simulator import OnOffSchedule, SimParams, apply_schedule, prefix_window, simulate

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05


def summarize(values) -> tuple[float, float]:
    """(mean, median); the median averages the two middle values for even counts."""
    vals = list(values)
    if not vals:
        raise ValueError("cannot summarize an empty list")
    return statistics.fmean(vals), statistics.median(vals)


def replicate_seed(master_seed: int, cell: int, rep: int) -> int:
    """Deterministic 64-bit seed for replicate ``rep`` of cell ``cell``."""
    state = np.random.SeedSequence([master_seed, cell, rep]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass
class ExperimentGrid:
    h_values: list = field(default_factory=lambda: [0.001, 0.002, 0.003])
    delta1_steps: list = field(default_factory=lambda: [100, 250, 500])
    delta2_steps: list = field(default_factory=lambda: [100, 250, 500])
    n_steps: int = 100_000
    reps: int = 10
    r: float = 0.4
    master_seed: int = 20240601
    spacing: float = 0.005
    start: tuple = (0.0, -0.5)
    workers: int = 1

    def __post_init__(self):
        if not (self.h_values and self.delta1_steps and self.delta2_steps):
            raise ValueError("experiment grid lists must be non-empty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")

    def cells(self):
        return list(itertools.product(self.h_values, self.delta1_steps, self.delta2_steps))


@dataclass
class ResultTable:
    """Per-cell replicate values keyed by ``(h, delta1, delta2)``.

    For gain tables ``mean``/``median`` hold the ratio-of-summaries gains and
    ``values`` the paired per-replicate gains (audit only).
    """

    metric: str
    cells: dict = field(default_factory=dict)

    def add(self, key, values, failures=0, mean=None, median=None):
        vals = [float(v) for v in values]
        if mean is None and vals:
            mean, median = summarize(vals)
        self.cells[key] = {"values": vals, "mean": mean, "median": median, "failures": failures}

    def mean(self, key):
        return self.cells[key]["mean"]

    def median(self, key):
        return self.cells[key]["median"]

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "cells": [{"h": k[0], "delta1": k[1], "delta2": k[2], **v} for k, v in sorted(self.cells.items())],
        }

    @classmethod
    def from_json(cls, data) -> "ResultTable":
        t = cls(data["metric"])
        for c in data["cells"]:
            key = (c["h"], c["delta1"], c["delta2"])
            t.cells[key] = {k: c[k] for k in ("values", "mean", "median", "failures")}
        return t

    def to_csv(self) -> str:
        keys = sorted(self.cells)
        d2s = sorted({k[2] for k in keys})
        lines = [",".join(["h", "delta1"] + [str(d) for d in d2s])]
        for h, d1 in sorted({(k[0], k[1]) for k in keys}):
            row = [repr(h), str(d1)]
            for d2 in d2s:
                c = self.cells.get((h, d1, d2))
                row.append("" if c is None or c["mean"] is None else f'"{c["mean"]:.4f} ({c["median"]:.4f})"')
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


@lru_cache(maxsize=4)
def _study_setup(spacing: float, r: float):
    S = study_domain()
    grid = Grid2D.covering(S.bbox, spacing, pad=2 * r + 2 * spacing)
    return S, grid, rasterize(S, grid)


def cell_steps(n_steps: int, d1: int, d2: int) -> tuple[int, int]:
    """(p, simulated steps) with the run ending in a complete ON window."""
    sched = OnOffSchedule(d1, d2)
    p = sched.windows_within(n_steps)
    if p < 1:
        raise ValueError(f"n_steps={n_steps} is shorter than one ON window of {d1} steps")
    return p, sched.n_steps_for(p)


def _replicate(args):
    h, d1, d2, seed, n_steps, metrics, r, spacing, start = args
    S, grid, Smask = _study_setup(spacing, r)
    p, n = cell_steps(n_steps, d1, d2)
    try:
        traj = simulate(SimParams(S, h, n, tuple(start), "linear", seed))
    except GeometryError as exc:
        return {"error": str(exc)}
    on = apply_schedule(traj, OnOffSchedule(d1, d2, h))
    cont = prefix_window(traj, p * d1)
    out = {}
    if "dH" in metrics:
        out["dH_onoff"] = hausdorff(on.points, Smask)
        out["dH_contiguous"] = hausdorff(cont.points, Smask)
    if "dmu" in metrics:
        out["dmu_onoff"] = distance_in_measure(rconvex_hull(on.points, r, grid).mask, Smask)
        out["dmu_contiguous"] = distance_in_measure(rconvex_hull(cont.points, r, grid).mask, Smask)
    out["n_rejected"] = traj.meta["n_rejected"]
    return out


def run_grid(grid: ExperimentGrid, metrics=("dH",), progress=None) -> dict:
    """Run every (cell, replicate) once; returns ResultTables keyed by metric name.

    On-off and contiguous metrics of one replicate come from the same path.
    """
    jobs, keys = [], []
    for j, (h, d1, d2) in enumerate(grid.cells()):
        for k in range(grid.reps):
            seed = replicate_seed(grid.master_seed, j, k)
            jobs.append((h, d1, d2, seed, grid.n_steps, tuple(metrics), grid.r, grid.spacing, tuple(grid.start)))
            keys.append(((h, d1, d2), k))
    workers = max(1, int(grid.workers))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_replicate, jobs, chunksize=1))
    else:
        results = []
        for i, job in enumerate(jobs):
            results.append(_replicate(job))
            if progress:
                progress(i + 1, len(jobs))

    names = [m for base in metrics for m in (f"{base}_onoff", f"{base}_contiguous")]
    tables = {name: ResultTable(name) for name in names}
    by_cell: dict = {}
    for (cell, k), res in zip(keys, results):
        by_cell.setdefault(cell, []).append(res)
    total_fail = 0
    for cell, res in by_cell.items():
        ok = [r_ for r_ in res if "error" not in r_]
        fails = len(res) - len(ok)
        total_fail += fails
        for name in names:
            tables[name].add(cell, [r_[name] for r_ in ok], failures=fails)
    if total_fail > MAX_FAILURE_RATE * len(results):
        raise RuntimeError(f"{total_fail} of {len(results)} replicates failed")
    return tables


def run_hausdorff_tables(grid: ExperimentGrid, progress=None) -> tuple[ResultTable, ResultTable]:
    t = run_grid(grid, ("dH",), progress)
    return t["dH_onoff"], t["dH_contiguous"]


def run_measure_tables(grid: ExperimentGrid, progress=None) -> tuple[ResultTable, ResultTable]:
    t = run_grid(grid, ("dmu",), progress)
    return t["dmu_onoff"], t["dmu_contiguous"]


def efficiency_gain(onoff: ResultTable, contiguous: ResultTable) -> ResultTable:
    """``1 - mean_onoff / mean_contiguous`` per cell, with ``1 - median/median`` alongside."""
    if set(onoff.cells) != set(contiguous.cells):
        raise ValueError("tables cover different cells")
    base = onoff.metric.split("_")[0]
    out = ResultTable(f"gain_{base}")
    for key in onoff.cells:
        a, b = onoff.cells[key], contiguous.cells[key]
        mean = None if not b["mean"] else 1.0 - a["mean"] / b["mean"]
        median = None if not b["median"] else 1.0 - a["median"] / b["median"]
        paired = [1.0 - x / y for x, y in zip(a["values"], b["values"]) if y]
        out.add(key, paired, mean=mean, median=median)
    return out


def run_convergence_diagnostic(T_list, reps: int, h=0.002, delta1_steps=100, delta2_steps=500, r=0.4,
                               spacing=0.005, master_seed=20240601, start=(0.0, -0.5)) -> dict:
    """Median d_H (points and hull) and d_mu (hull) against S as the observed horizon grows.

    Each replicate simulates the longest horizon once; shorter horizons are
    its prefixes, so the curves are paired across T.
    """
    T_list = [int(t) for t in T_list]
    if sorted(T_list) != T_list:
        raise ValueError("T_list must be increasing")
    S, grid, Smask = _study_setup(spacing, r)
    sched = OnOffSchedule(delta1_steps, delta2_steps, h)
    per_T = {T: {"dH_points": [], "dH_hull": [], "dmu_hull": []} for T in T_list}
    for k in range(reps):
        seed = replicate_seed(master_seed, 10_000, k)
        traj = simulate(SimParams(S, h, T_list[-1], tuple(start), "linear", seed))
        on = apply_schedule(traj, sched)
        for T in T_list:
            pts = on.points[on.steps < T]
            hull = rconvex_hull(pts, r, grid).mask
            per_T[T]["dH_points"].append(hausdorff(pts, Smask))
            per_T[T]["dH_hull"].append(hausdorff(hull, Smask))
            per_T[T]["dmu_hull"].append(distance_in_measure(hull, Smask))
    times = [T * h for T in T_list]
    rates = rate_curve(times, 2).tolist() if min(times) > 1 else [None] * len(times)
    rows = []
    for T, t, rate in zip(T_list, times, rates):
        row = {"T_steps": T, "T_time": t, "rate": rate}
        for name, vals in per_T[T].items():
            row[f"median_{name}"] = statistics.median(vals)
            row[name] = vals
        if rate:
            row["ratio_dH_points_to_rate"] = row["median_dH_points"] / rate
        rows.append(row)
    return {"h": h, "delta1_steps": delta1_steps, "delta2_steps": delta2_steps, "r": r, "reps": reps, "rows": rows}


def manifest(grid: ExperimentGrid | None = None, **extra) -> dict:
    return {
        "package_version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "host_cpus": os.cpu_count(),
        "created_unix": time.time(),
        "grid": asdict(grid) if grid is not None else None,
        **extra,
    }

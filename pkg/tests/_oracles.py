"""Independent reference computations used by the test suite."""

import math

import numpy as np

from homerange.geometry import Grid2D, study_domain
from homerange.simulator import SimParams, simulate

STUDY_AREA = 1.5 * math.pi - 0.25 * math.pi


def in_study_set(x, y, tol=1e-9):
    x, y = np.asarray(x), np.asarray(y)
    return (4 * x * x / 9 + y * y <= 1 + tol) & ((x - 0.8) ** 2 + y * y >= 0.25 - tol)


def study_normalizer_mc(n=10_000_000, seed=0, chunk=1_000_000):
    """Monte Carlo estimate of the integral of exp(-|x|^2) over the study set."""
    rng = np.random.default_rng(seed)
    total = 0.0
    for k in range(0, n, chunk):
        x = rng.uniform(-1.5, 1.5, chunk)
        y = rng.uniform(-1.0, 1.0, chunk)
        total += np.where(in_study_set(x, y), np.exp(-(x * x + y * y)), 0.0).sum()
    return total / n * 6.0


def iid_study_draws(n, seed=0):
    """Exact draws from exp(-|x|^2) restricted to the study set, by rejection from N(0, I/2)."""
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o) for o in out) < n:
        z = rng.normal(0.0, math.sqrt(0.5), size=(4 * n, 2))
        out.append(z[in_study_set(z[:, 0], z[:, 1])])
    return np.vstack(out)[:n]


def stationary_draws(n, seed, h=0.01, thin=50, burn=10_000):
    """Thinned simulator output after burn-in."""
    traj = simulate(SimParams(study_domain(), h, burn + n * thin, (0.0, -0.5), "linear", seed))
    return traj.points[burn + thin - 1 :: thin][:n]


def inner_parallel_oracle(inside, eps, grid: Grid2D, n_dir=64, n_rad=8):
    """Cells whose eps-ball stays inside, probing rays in n_dir directions at n_rad radii."""
    X, Y = grid.mesh()
    keep = inside(X, Y)
    ang = 2 * math.pi * np.arange(n_dir) / n_dir
    for rho in eps * np.arange(1, n_rad + 1) / n_rad:
        for a in ang:
            keep &= inside(X + rho * math.cos(a), Y + rho * math.sin(a))
    return keep


def rconvex_bruteforce(points, r, query, n_ang=720):
    """Query lies outside the r-convex hull iff some open r-ball through a circle of
    centres around it misses every point; centres scanned on rings of radius < r."""
    pts = np.asarray(points, float)
    q = np.asarray(query, float)
    ang = 2 * math.pi * np.arange(n_ang) / n_ang
    ring = np.stack([np.cos(ang), np.sin(ang)], 1)
    for rho in np.linspace(0.0, r * (1 - 1e-9), 60):
        c = q + rho * ring
        d = np.sqrt(((c[:, None, :] - pts[None]) ** 2).sum(-1)).min(1)
        if np.any(d >= r):
            return False
    return True

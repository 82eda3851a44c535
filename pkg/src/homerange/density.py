"""Stationary density: kernel estimate, closed form for the study case, level sets, drift plug-in."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import marching_squares
from .geometry import Domain, Grid2D, rasterize
from .simulator import POTENTIALS


@dataclass(frozen=True)
class KernelSpec:
    family: str = "gaussian"
    bandwidth: float = 0.2

    def __post_init__(self):
        if self.family not in ("gaussian", "epanechnikov"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    def profile(self, sq: np.ndarray) -> np.ndarray:
        """Kernel value at squared standardised distance ``sq`` (bivariate, unit mass)."""
        if self.family == "gaussian":
            return np.exp(-0.5 * sq) / (2.0 * math.pi)
        return np.where(sq < 1.0, (2.0 / math.pi) * (1.0 - sq), 0.0)


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: Grid2D
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.spacing**2)

    def at(self, point) -> float:
        j, i = self.grid.cell_index(np.asarray(point, dtype=float))
        if i[0] < 0:
            raise ValueError("point outside grid")
        return float(self.values[j[0], i[0]])


def kde(points, kernel: KernelSpec, grid: Grid2D, chunk: int = 4096) -> DensityField:
    """``g_n(x) = 1/(n h^2) sum_i K((x - X_i)/h)`` at every cell centre, no boundary correction."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 1:
        raise ValueError("kde needs at least one point")
    h = kernel.bandwidth
    xs, ys = grid.xs, grid.ys
    # separable for the Gaussian: exp(-(dx^2+dy^2)/2h^2) = ex * ey
    if kernel.family == "gaussian":
        vals = np.zeros(grid.shape)
        for k in range(0, n, chunk):
            p = pts[k : k + chunk]
            ex = np.exp(-0.5 * ((xs[None, :] - p[:, :1]) / h) ** 2)
            ey = np.exp(-0.5 * ((ys[None, :] - p[:, 1:]) / h) ** 2)
            vals += ey.T @ ex
        vals /= 2.0 * math.pi * n * h * h
    else:
        X, Y = grid.mesh()
        vals = np.zeros(grid.shape)
        for p in pts:
            sq = ((X - p[0]) ** 2 + (Y - p[1]) ** 2) / (h * h)
            vals += kernel.profile(sq)
        vals /= n * h * h
    return DensityField(grid, vals, {"kind": "kde", "n": n, "bandwidth": h, "kernel": kernel.family})


def true_density(domain: Domain, f_name: str, grid: Grid2D) -> DensityField:
    """``exp(-f) 1_S`` normalised by its grid quadrature."""
    if f_name not in POTENTIALS:
        raise ValueError(f"no closed form for potential {f_name!r}")
    X, Y = grid.mesh()
    f = _VECTOR_F.get(f_name) or np.vectorize(POTENTIALS[f_name], otypes=[float])
    inside = rasterize(domain, grid).occupancy
    vals = np.where(inside, np.exp(-f(X, Y)), 0.0)
    c = vals.sum() * grid.spacing**2
    if c <= 0:
        raise ValueError("normaliser is zero: the domain has no cells on this grid")
    return DensityField(grid, vals / c, {"kind": "true", "potential": f_name, "normalizer": float(c)})


_VECTOR_F = {"quadratic": lambda X, Y: X * X + Y * Y, "zero": lambda X, Y: np.zeros_like(X)}


def level_set_contours(field: DensityField, lam: float) -> list[np.ndarray]:
    """Closed polylines approximating the boundary of ``{field > lam}``; empty if lam >= max."""
    if not lam > 0:
        raise ValueError("level must be positive")
    if lam >= field.values.max():
        return []
    return marching_squares(field.values, field.grid, lam)


def level_region(field: DensityField, lam: float) -> np.ndarray:
    return field.values > lam


def mass_quantile_level(field: DensityField, mass: float) -> float:
    """Level ``lam`` whose upper set ``{g > lam}`` carries roughly ``mass`` of the total."""
    v = np.sort(field.values.ravel())[::-1]
    cum = np.cumsum(v) / v.sum()
    return float(v[min(np.searchsorted(cum, mass), len(v) - 1)])


def _seg_dist(p, a, b):
    # distances from points p (m, 2) to segments a->b (k, 2); returns (m, k)
    ab = b - a
    L2 = (ab**2).sum(1)
    L2 = np.where(L2 == 0, 1.0, L2)
    t = ((p[:, None, :] - a[None]) * ab[None]).sum(-1) / L2[None]
    t = np.clip(t, 0.0, 1.0)
    q = a[None] + t[..., None] * ab[None]
    d = np.sqrt(((p[:, None, :] - q) ** 2).sum(-1))
    # endpoint distances are exact, so shared vertices give exactly zero
    da = np.sqrt(((p[:, None, :] - a[None]) ** 2).sum(-1))
    db = np.sqrt(((p[:, None, :] - b[None]) ** 2).sum(-1))
    return np.minimum(d, np.minimum(da, db))


def _directed(P, Q, chunk=512):
    verts = np.vstack(P)
    a = np.vstack([q[:-1] for q in Q])
    b = np.vstack([q[1:] for q in Q])
    worst = 0.0
    for k in range(0, len(verts), chunk):
        worst = max(worst, float(_seg_dist(verts[k : k + chunk], a, b).min(axis=1).max()))
    return worst


def contour_hausdorff(A: list, B: list) -> float:
    """Hausdorff distance between two polyline sets, vertices against segments in both directions."""
    if not A or not B:
        raise ValueError("contour sets must be non-empty")
    return max(_directed(A, B), _directed(B, A))


def drift_estimate(field: DensityField, point, floor_ratio: float = 1e-8) -> np.ndarray:
    """``grad log g / 2`` at ``point``.

    Central differences of ``log g`` at the four cell centres around the
    point, blended bilinearly. Raises where any stencil value is at or
    below ``floor_ratio * max(g)``.
    """
    g = field.grid
    p = np.asarray(point, dtype=float)
    fx = (p[0] - g.origin[0]) / g.spacing
    fy = (p[1] - g.origin[1]) / g.spacing
    i0, j0 = int(math.floor(fx)), int(math.floor(fy))
    if not (1 <= i0 and i0 + 2 < g.nx and 1 <= j0 and j0 + 2 < g.ny):
        raise ValueError("point too close to the grid edge for a central difference")
    v = field.values[j0 - 1 : j0 + 3, i0 - 1 : i0 + 3]
    if v.min() <= floor_ratio * float(field.values.max()):
        raise ValueError("density too small for drift estimation here")
    L = np.log(v)
    gx = (L[1:3, 2:4] - L[1:3, 0:2]) / (2 * g.spacing)
    gy = (L[2:4, 1:3] - L[0:2, 1:3]) / (2 * g.spacing)
    tx, ty = fx - i0, fy - j0
    w = np.array([[(1 - ty) * (1 - tx), (1 - ty) * tx], [ty * (1 - tx), ty * tx]])
    return 0.5 * np.array([(w * gx).sum(), (w * gy).sum()])

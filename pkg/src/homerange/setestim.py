"""r-convex hulls, Hausdorff distance and distance in measure.

The r-convex hull of a finite cloud is the complement of the union of all
open r-balls that contain no sample. On a grid that is: a cell centre ``g``
is excluded iff some centre ``c`` with ``dist(c, cloud) >= r`` lies within
distance ``< r`` of ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .contour import marching_squares
from .geometry import Grid2D, RegionMask, measure


@dataclass(frozen=True, eq=False)
class HullResult:
    mask: RegionMask
    boundary: list
    r: float


def _as_points(cloud) -> np.ndarray:
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.size == 0:
        raise ValueError("point cloud is empty")
    if not np.isfinite(pts).all():
        raise ValueError("point cloud has non-finite coordinates")
    return pts


def rconvex_hull(cloud, r: float, grid: Grid2D, marking: str = "certified") -> HullResult:
    """Grid realisation of the r-convex hull of ``cloud``.

    Candidate ball centres are the grid's own cell centres. ``marking``:

    * ``"certified"`` (default): exclude cells within ``< r`` of an empty-ball
      centre, then refine the thin band just beyond that radius by sliding
      each cell's nearest centre towards it while it stays ``>= r`` from the
      cloud, and by trying balls tangent to pairs of nearby samples. Every
      exclusion is witnessed by an actual empty ball.
    * ``"conservative"``: exclude only cells within ``r - spacing*sqrt(2)``.

    Cells containing a sample are always occupied.
    """
    if marking not in ("certified", "conservative"):
        raise ValueError("marking must be 'certified' or 'conservative'")
    pts = _as_points(cloud)
    s = grid.spacing
    if not r >= 2 * s:
        raise ValueError(f"r={r} is below twice the grid spacing {s}; the grid cannot represent this hull")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if not grid.covers((lo[0] - 2 * r, lo[1] - 2 * r, hi[0] + 2 * r, hi[1] + 2 * r)):
        raise ValueError("grid must cover the cloud's bounding box dilated by 2r")

    tree = cKDTree(pts)
    centers = grid.centers()
    d_cloud, _ = tree.query(centers)
    d_cloud = d_cloud.reshape(grid.shape)
    empty = d_cloud >= r
    if not empty.any():
        raise ValueError("no empty ball centre on the grid; enlarge the grid")
    dist, (jj, ii) = ndimage.distance_transform_edt(~empty, sampling=s, return_indices=True)

    if marking == "conservative":
        excluded = dist < r - s * math.sqrt(2.0)
    else:
        excluded = dist < r
        band = ~excluded & (dist < r + 2 * s)
        if band.any():
            bj, bi = np.nonzero(band)
            g = np.column_stack([grid.origin[0] + bi * s, grid.origin[1] + bj * s])
            c0 = np.column_stack([grid.origin[0] + ii[bj, bi] * s, grid.origin[1] + jj[bj, bi] * s])
            hit = _slide_towards(tree, c0, g, r)
            miss = ~hit
            hit[miss] = _pair_witness(tree, pts, g[miss], r)
            excluded[bj, bi] = hit

    occ = ~excluded
    j, i = grid.cell_index(pts)
    ok = i >= 0
    occ[j[ok], i[ok]] = True
    mask = RegionMask(grid, occ, {"r": r, "marking": marking})
    return HullResult(mask, mask_boundary(mask), r)


def _slide_towards(tree, c0, g, r, iters=40):
    """For each pair, move c0 towards g as far as dist(., cloud) >= r holds; test |g - c*| < r."""
    lo = np.zeros(len(g))
    hi = np.ones(len(g))
    delta = g - c0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        d, _ = tree.query(c0 + mid[:, None] * delta)
        ok = d >= r
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    c = c0 + lo[:, None] * delta
    d, _ = tree.query(c)
    witnessed = d >= r
    return witnessed & (np.hypot(*(g - c).T) < r)


def _pair_witness(tree, pts, g, r, k=8, chunk=20_000):
    """Test the centres of r-balls through two of each cell's k nearest samples.

    These tangent centres are the vertices of the hull's complement; a cell is
    excluded when one of them lies within ``< r`` and is ``>= r`` from the whole cloud.
    """
    out = np.zeros(len(g), dtype=bool)
    if len(g) == 0 or len(pts) < 2:
        return out
    k = min(k, len(pts))
    ia, ib = np.triu_indices(k, 1)
    for s0 in range(0, len(g), chunk):
        gg = g[s0 : s0 + chunk]
        _, nn = tree.query(gg, k=k)
        a, b = pts[nn[:, ia]], pts[nn[:, ib]]
        mid = 0.5 * (a + b)
        half = 0.5 * np.hypot(*(b - a).transpose(2, 0, 1))
        ok = (half > 0) & (half < r)
        t = np.sqrt(np.where(ok, r * r - half * half, 0.0)) / np.where(ok, 2 * half, 1.0)
        perp = np.stack([-(b - a)[..., 1], (b - a)[..., 0]], -1) * t[..., None]
        for sign in (1.0, -1.0):
            c = mid + sign * perp
            near = ok & (np.hypot(*(c - gg[:, None, :]).transpose(2, 0, 1)) < r)
            rows, cols = np.nonzero(near & ~out[s0 : s0 + len(gg), None])
            if len(rows) == 0:
                continue
            d, _ = tree.query(c[rows, cols])
            good = rows[d >= r * (1 - 1e-12)]
            out[s0 + good] = True
    return out


def mask_boundary(mask: RegionMask) -> list:
    """Closed polylines along the cell-centre midpoints separating occupied from free cells."""
    return marching_squares(mask.occupancy.astype(float), mask.grid, 0.5)


def rconvex_membership_oracle(cloud, r: float, query, center_spacing: float) -> bool:
    """Definitional membership test (slow): is ``query`` outside every empty open r-ball?

    Candidate centres are the lattice ``center_spacing * Z^2``.
    """
    if center_spacing > r / 20:
        raise ValueError("center_spacing must be <= r/20")
    pts = _as_points(cloud)
    q = np.asarray(query, dtype=float)
    cs = center_spacing
    k0 = np.floor((q - r) / cs).astype(int)
    k1 = np.ceil((q + r) / cs).astype(int)
    gx = np.arange(k0[0], k1[0] + 1) * cs
    gy = np.arange(k0[1], k1[1] + 1) * cs
    X, Y = np.meshgrid(gx, gy)
    near = (X - q[0]) ** 2 + (Y - q[1]) ** 2 < r * r
    cand = np.column_stack([X[near], Y[near]])
    d, _ = cKDTree(pts).query(cand)
    return not bool((d >= r).any())


class MembershipOracle:
    """Batch form of :func:`rconvex_membership_oracle` sharing one lattice of centre distances."""

    def __init__(self, cloud, r: float, center_spacing: float, bbox):
        if center_spacing > r / 20:
            raise ValueError("center_spacing must be <= r/20")
        self.pts = _as_points(cloud)
        self.r = r
        self.cs = center_spacing
        x0, y0, x1, y1 = bbox
        self.k0 = np.floor((np.array([x0, y0]) - r) / center_spacing).astype(int) - 1
        k1 = np.ceil((np.array([x1, y1]) + r) / center_spacing).astype(int) + 1
        gx = np.arange(self.k0[0], k1[0] + 1) * center_spacing
        gy = np.arange(self.k0[1], k1[1] + 1) * center_spacing
        X, Y = np.meshgrid(gx, gy)
        d, _ = cKDTree(self.pts).query(np.column_stack([X.ravel(), Y.ravel()]))
        self.empty = (d >= r).reshape(X.shape)
        self.X, self.Y = X, Y

    def __call__(self, query) -> bool:
        q = np.asarray(query, dtype=float)
        a = np.floor((q - self.r) / self.cs).astype(int) - self.k0
        b = np.ceil((q + self.r) / self.cs).astype(int) - self.k0 + 1
        sl = (slice(a[1], b[1]), slice(a[0], b[0]))
        X, Y = self.X[sl], self.Y[sl]
        near = (X - q[0]) ** 2 + (Y - q[1]) ** 2 < self.r * self.r
        return not bool((near & self.empty[sl]).any())


def _representatives(A):
    if isinstance(A, RegionMask):
        pts = A.occupied_centers()
        if len(pts) == 0:
            raise ValueError("mask is empty")
        return pts
    return _as_points(A)


def hausdorff(A, B) -> float:
    """Hausdorff distance between point clouds and/or masks (masks via occupied cell centres)."""
    if isinstance(A, RegionMask) and isinstance(B, RegionMask) and A.grid == B.grid:
        if not A.occupancy.any() or not B.occupancy.any():
            raise ValueError("mask is empty")
        s = A.grid.spacing
        dB = ndimage.distance_transform_edt(~B.occupancy, sampling=s)
        dA = ndimage.distance_transform_edt(~A.occupancy, sampling=s)
        return float(max(dB[A.occupancy].max(), dA[B.occupancy].max()))
    a, b = _representatives(A), _representatives(B)
    dab, _ = cKDTree(b).query(a)
    dba, _ = cKDTree(a).query(b)
    return float(max(dab.max(), dba.max()))


def hausdorff_bruteforce(A, B) -> float:
    """Quadratic-time reference used by the tests."""
    a, b = _representatives(A), _representatives(B)
    D = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def distance_in_measure(A: RegionMask, B: RegionMask) -> float:
    """``mu(A \\ B) + mu(B \\ A)`` on a shared grid."""
    if A.grid != B.grid:
        raise ValueError("distance in measure needs masks on the same grid")
    return measure(A - B) + measure(B - A)

"""Implicit planar domains, boundary reflection, grids and grid-based measure.

A :class:`Domain` is an intersection of simple closed regions ("primitives").
Scalar methods (``contains``, ``project``) work on plain floats because the
simulator calls them once per step; the ``*_grid`` variants are vectorised
over numpy arrays for rasterisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# closed-condition slack: boundary points count as inside
CONTAINS_TOL = 1e-12
NEWTON_MAX_ITER = 32
NEWTON_TOL = 1e-12


class GeometryError(RuntimeError):
    """Raised when a boundary projection fails to converge."""


# --------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class InsideEllipse:
    """Closed axis-aligned ellipse ``((x-cx)/a)^2 + ((y-cy)/b)^2 <= 1``."""

    center: tuple[float, float]
    semi_axes: tuple[float, float]

    def contains(self, x: float, y: float) -> bool:
        a, b = self.semi_axes
        u = (x - self.center[0]) / a
        v = (y - self.center[1]) / b
        return u * u + v * v <= 1.0 + CONTAINS_TOL

    def contains_grid(self, X, Y):
        a, b = self.semi_axes
        return ((X - self.center[0]) / a) ** 2 + ((Y - self.center[1]) / b) ** 2 <= 1.0 + CONTAINS_TOL

    def project(self, x: float, y: float) -> tuple[float, float]:
        cx, cy = self.center
        a, b = self.semi_axes
        px, py = x - cx, y - cy
        if a == b:
            rr = math.hypot(px, py)
            if rr == 0.0:
                return cx + a, cy
            return cx + a * px / rr, cy + a * py / rr
        theta = _ellipse_newton(a, b, px, py, math.atan2(py / b, px / a))
        if theta is None:
            # fall back to the best of a coarse scan as seed
            ts = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
            d2 = (a * np.cos(ts) - px) ** 2 + (b * np.sin(ts) - py) ** 2
            theta = _ellipse_newton(a, b, px, py, float(ts[int(np.argmin(d2))]))
            if theta is None:
                raise GeometryError(f"ellipse projection did not converge for ({x}, {y})")
        return cx + a * math.cos(theta), cy + b * math.sin(theta)

    def bbox(self):
        (cx, cy), (a, b) = self.center, self.semi_axes
        return (cx - a, cy - b, cx + a, cy + b)


def _ellipse_newton(a, b, px, py, theta):
    """Newton on the stationarity condition of |E(θ) - p|^2; None unless it lands on a minimum.

    ``g`` below is minus the derivative of half the squared distance, so a
    minimum needs ``dg < 0``.
    """
    k = a * a - b * b
    for _ in range(NEWTON_MAX_ITER):
        s, c = math.sin(theta), math.cos(theta)
        g = k * s * c - px * a * s + py * b * c
        dg = k * (c * c - s * s) - px * a * c - py * b * s
        if dg >= 0.0:
            return None
        step = g / dg
        theta -= step
        if abs(step) < NEWTON_TOL:
            return theta
    return None


@dataclass(frozen=True)
class InsideDisk:
    center: tuple[float, float]
    radius: float

    def contains(self, x: float, y: float) -> bool:
        dx, dy = x - self.center[0], y - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius * (1.0 + CONTAINS_TOL)

    def contains_grid(self, X, Y):
        return (X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2 <= self.radius**2 * (1.0 + CONTAINS_TOL)

    def project(self, x: float, y: float) -> tuple[float, float]:
        return _circle_project(self.center, self.radius, x, y)

    def bbox(self):
        (cx, cy), r = self.center, self.radius
        return (cx - r, cy - r, cx + r, cy + r)


@dataclass(frozen=True)
class OutsideDisk:
    center: tuple[float, float]
    radius: float

    def contains(self, x: float, y: float) -> bool:
        dx, dy = x - self.center[0], y - self.center[1]
        return dx * dx + dy * dy >= self.radius * self.radius * (1.0 - CONTAINS_TOL)

    def contains_grid(self, X, Y):
        return (X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2 >= self.radius**2 * (1.0 - CONTAINS_TOL)

    def project(self, x: float, y: float) -> tuple[float, float]:
        return _circle_project(self.center, self.radius, x, y)

    def bbox(self):
        return None


def _circle_project(center, radius, x, y):
    cx, cy = center
    dx, dy = x - cx, y - cy
    rr = math.hypot(dx, dy)
    if rr == 0.0:
        return cx + radius, cy
    return cx + radius * dx / rr, cy + radius * dy / rr


@dataclass(frozen=True)
class InsidePolygon:
    """Closed simple polygon; vertices in either orientation."""

    vertices: tuple[tuple[float, float], ...]

    def _edges(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def contains(self, x: float, y: float) -> bool:
        inside = False
        for (x0, y0), (x1, y1) in self._edges():
            if _point_segment_dist(x, y, x0, y0, x1, y1) <= 1e-12:
                return True
            if (y0 > y) != (y1 > y):
                xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
                if x < xc:
                    inside = not inside
        return inside

    def contains_grid(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        inside = np.zeros(X.shape, dtype=bool)
        on_edge = np.zeros(X.shape, dtype=bool)
        for (x0, y0), (x1, y1) in self._edges():
            crosses = (y0 > Y) != (y1 > Y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x0 + (Y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (X < xc)
            dx, dy = x1 - x0, y1 - y0
            L2 = dx * dx + dy * dy
            t = np.clip(((X - x0) * dx + (Y - y0) * dy) / L2, 0.0, 1.0) if L2 else np.zeros(X.shape)
            on_edge |= np.hypot(X - x0 - t * dx, Y - y0 - t * dy) <= 1e-12
        return inside | on_edge

    def project(self, x: float, y: float) -> tuple[float, float]:
        best, best_d = None, math.inf
        for (x0, y0), (x1, y1) in self._edges():
            qx, qy = _segment_closest(x, y, x0, y0, x1, y1)
            d = math.hypot(qx - x, qy - y)
            if d < best_d:
                best, best_d = (qx, qy), d
        return best

    def bbox(self):
        v = np.asarray(self.vertices, dtype=float)
        return (*v.min(axis=0), *v.max(axis=0))


@dataclass(frozen=True)
class HalfPlane:
    """``{x : (x - point) . normal >= 0}``; unbounded, so the domain needs an explicit bbox."""

    point: tuple[float, float]
    normal: tuple[float, float]

    def _signed(self, x, y):
        nx, ny = self.normal
        return ((x - self.point[0]) * nx + (y - self.point[1]) * ny) / math.hypot(nx, ny)

    def contains(self, x: float, y: float) -> bool:
        return self._signed(x, y) >= -CONTAINS_TOL

    def contains_grid(self, X, Y):
        return self._signed(X, Y) >= -CONTAINS_TOL

    def project(self, x: float, y: float) -> tuple[float, float]:
        nx, ny = self.normal
        n = math.hypot(nx, ny)
        s = self._signed(x, y)
        return x - s * nx / n, y - s * ny / n

    def bbox(self):
        return None


def _segment_closest(x, y, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0.0 else max(0.0, min(1.0, ((x - x0) * dx + (y - y0) * dy) / L2))
    return x0 + t * dx, y0 + t * dy


def _point_segment_dist(x, y, x0, y0, x1, y1):
    qx, qy = _segment_closest(x, y, x0, y0, x1, y1)
    return math.hypot(qx - x, qy - y)


PRIMITIVE_KINDS = {
    "inside_ellipse": InsideEllipse,
    "inside_disk": InsideDisk,
    "outside_disk": OutsideDisk,
    "inside_polygon": InsidePolygon,
    "half_plane": HalfPlane,
}


# --------------------------------------------------------------------------
# domain


@dataclass(frozen=True)
class Domain:
    """Intersection of primitives, with a bounding box that contains it."""

    primitives: tuple
    bbox: tuple[float, float, float, float]
    name: str = "domain"

    def contains(self, x: float, y: float) -> bool:
        for prim in self.primitives:
            if not prim.contains(x, y):
                return False
        return True

    def contains_grid(self, X, Y):
        out = np.ones(np.shape(X), dtype=bool)
        for prim in self.primitives:
            out &= prim.contains_grid(X, Y)
        return out

    def boundary_point(self, x: float, y: float) -> tuple[float, float]:
        """Nearest point of the boundary among the primitives' projections.

        Projections that do not lie on the boundary of the whole domain are
        discarded; ties go to the primitive declared first.
        """
        best, best_d = None, math.inf
        fallback, fallback_d = None, math.inf
        for prim in self.primitives:
            bx, by = prim.project(x, y)
            d = math.hypot(bx - x, by - y)
            if d < fallback_d:
                fallback, fallback_d = (bx, by), d
            if d < best_d and self._on_boundary(bx, by, prim):
                best, best_d = (bx, by), d
        return best if best is not None else fallback

    def _on_boundary(self, bx, by, owner) -> bool:
        for prim in self.primitives:
            if prim is owner:
                continue
            if not prim.contains(bx, by) and not _near(prim, bx, by):
                return False
        return True

    def reflect(self, x: float, y: float) -> tuple[float, float]:
        """Mirror image ``2b - x`` of a point across its nearest boundary point ``b``."""
        bx, by = self.boundary_point(x, y)
        return 2.0 * bx - x, 2.0 * by - y


def _near(prim, x, y, tol=1e-9):
    px, py = prim.project(x, y)
    return math.hypot(px - x, py - y) <= tol


def contains(domain: Domain, point) -> bool:
    return domain.contains(float(point[0]), float(point[1]))


def reflect(domain: Domain, point) -> tuple[float, float]:
    return domain.reflect(float(point[0]), float(point[1]))


def study_domain() -> Domain:
    """Ellipse ``4x^2/9 + y^2 <= 1`` minus the open disk of radius 1/2 at (4/5, 0)."""
    return Domain(
        primitives=(InsideEllipse((0.0, 0.0), (1.5, 1.0)), OutsideDisk((0.8, 0.0), 0.5)),
        bbox=(-1.5, -1.0, 1.5, 1.0),
        name="ellipse_minus_disk",
    )


def disk_domain(center=(0.0, 0.0), radius=1.0) -> Domain:
    cx, cy = center
    return Domain((InsideDisk((cx, cy), radius),), (cx - radius, cy - radius, cx + radius, cy + radius), "disk")


def halfplane_domain(bbox=(-10.0, 0.0, 10.0, 10.0)) -> Domain:
    """Upper half-plane ``y >= 0``; bbox only bounds rasterisation."""
    return Domain((HalfPlane((0.0, 0.0), (0.0, 1.0)),), tuple(bbox), "upper_half_plane")


def domain_from_spec(spec: dict) -> Domain:
    """Build a domain from ``{"name", "bbox"?, "primitives": [{"kind", ...}]}``."""
    if spec.get("preset") == "study":
        return study_domain()
    prims = []
    for p in spec["primitives"]:
        kind = p["kind"]
        if kind not in PRIMITIVE_KINDS:
            raise ValueError(f"unknown primitive kind {kind!r}")
        if kind == "inside_ellipse":
            prims.append(InsideEllipse(tuple(map(float, p["center"])), tuple(map(float, p["semi_axes"]))))
        elif kind in ("inside_disk", "outside_disk"):
            prims.append(PRIMITIVE_KINDS[kind](tuple(map(float, p["center"])), float(p["radius"])))
        elif kind == "inside_polygon":
            prims.append(InsidePolygon(tuple(tuple(map(float, v)) for v in p["vertices"])))
        else:
            prims.append(HalfPlane(tuple(map(float, p["point"])), tuple(map(float, p["normal"]))))
    bbox = spec.get("bbox")
    if bbox is None:
        boxes = [b for b in (q.bbox() for q in prims) if b is not None]
        if not boxes:
            raise ValueError("domain is unbounded; give an explicit bbox")
        boxes = np.asarray(boxes)
        bbox = (boxes[:, 0].max(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].min())
    return Domain(tuple(prims), tuple(float(v) for v in bbox), spec.get("name", "domain"))


# --------------------------------------------------------------------------
# grids and masks


@dataclass(frozen=True)
class Grid2D:
    """Cell-centred grid; cell (i, j) has centre ``origin + (i, j) * spacing``.

    Arrays on the grid are indexed ``[j, i]`` (shape ``(ny, nx)``).
    """

    origin: tuple[float, float]
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")

    @classmethod
    def covering(cls, bbox, spacing: float, pad: float = 0.0) -> "Grid2D":
        x0, y0, x1, y1 = bbox
        x0, y0, x1, y1 = x0 - pad, y0 - pad, x1 + pad, y1 + pad
        nx = int(math.ceil((x1 - x0) / spacing)) + 1
        ny = int(math.ceil((y1 - y0) / spacing)) + 1
        return cls((x0, y0), float(spacing), nx, ny)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def xs(self):
        return self.origin[0] + np.arange(self.nx) * self.spacing

    @property
    def ys(self):
        return self.origin[1] + np.arange(self.ny) * self.spacing

    def mesh(self):
        return np.meshgrid(self.xs, self.ys)

    def centers(self):
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def cell_index(self, points):
        """(j, i) of the cell containing each point, or -1 where outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        i = np.floor((pts[:, 0] - self.origin[0]) / self.spacing + 0.5).astype(int)
        j = np.floor((pts[:, 1] - self.origin[1]) / self.spacing + 0.5).astype(int)
        bad = (i < 0) | (i >= self.nx) | (j < 0) | (j >= self.ny)
        i[bad] = -1
        j[bad] = -1
        return j, i

    def bounds(self):
        h = self.spacing / 2
        return (self.origin[0] - h, self.origin[1] - h, self.xs[-1] + h, self.ys[-1] + h)

    def covers(self, bbox) -> bool:
        gx0, gy0, gx1, gy1 = self.bounds()
        x0, y0, x1, y1 = bbox
        return gx0 <= x0 and gy0 <= y0 and gx1 >= x1 and gy1 >= y1


@dataclass(frozen=True, eq=False)
class RegionMask:
    grid: Grid2D
    occupancy: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.occupancy.shape != self.grid.shape:
            raise ValueError(f"occupancy shape {self.occupancy.shape} != grid shape {self.grid.shape}")

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("masks live on different grids")

    def __or__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.occupancy | other.occupancy)

    def __and__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.occupancy & other.occupancy)

    def __sub__(self, other):
        self._check(other)
        return RegionMask(self.grid, self.occupancy & ~other.occupancy)

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    def occupied_centers(self):
        j, i = np.nonzero(self.occupancy)
        return np.column_stack([self.grid.origin[0] + i * self.grid.spacing, self.grid.origin[1] + j * self.grid.spacing])

    def to_text(self) -> str:
        g = self.grid
        lines = [f"grid {g.origin[0]!r} {g.origin[1]!r} {g.spacing!r} {g.nx} {g.ny}"]
        lines += ["".join("1" if v else "0" for v in row) for row in self.occupancy]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RegionMask":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[0] != "grid" or len(head) != 6:
            raise ValueError("bitmap header must be 'grid x0 y0 spacing nx ny'")
        grid = Grid2D((float(head[1]), float(head[2])), float(head[3]), int(head[4]), int(head[5]))
        rows = lines[1:]
        if len(rows) != grid.ny or any(len(r) != grid.nx for r in rows):
            raise ValueError("bitmap rows do not match header dimensions")
        occ = np.array([[c == "1" for c in r] for r in rows], dtype=bool)
        return cls(grid, occ)


def rasterize(domain: Domain, grid: Grid2D) -> RegionMask:
    """Cells whose centre lies in the domain."""
    X, Y = grid.mesh()
    return RegionMask(grid, domain.contains_grid(X, Y))


def measure(mask: RegionMask) -> float:
    return mask.count * mask.grid.spacing**2


def inner_parallel_set(domain: Domain, eps: float, grid: Grid2D) -> RegionMask:
    """Cells whose centre is at distance >= eps from the complement of the domain.

    Cells beyond the grid count as complement. ``meta["empty"]`` flags an
    empty result (eps larger than the inradius).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    inside = rasterize(domain, grid).occupancy
    padded = np.pad(inside, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded, sampling=grid.spacing)[1:-1, 1:-1]
    occ = inside & (dist >= eps)
    return RegionMask(grid, occ, {"empty": not occ.any(), "eps": eps})


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def covering_number_bound(eps: float, mu_S: float, d: int = 2) -> float:
    """Upper bound ``mu(S) / mu(B(0, eps/4))`` on the eps/2-covering number."""
    if not eps > 0 or not mu_S > 0 or d < 1:
        raise ValueError("need eps > 0, mu_S > 0, d >= 1")
    return (eps / 4.0) ** (-d) * mu_S / unit_ball_volume(d)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage
from scipy.spatial import Delaunay

from _oracles import rconvex_bruteforce
from homerange.geometry import Grid2D, RegionMask, disk_domain, measure, rasterize
from homerange.setestim import (
    MembershipOracle,
    distance_in_measure,
    hausdorff,
    hausdorff_bruteforce,
    rconvex_hull,
    rconvex_membership_oracle,
)

SEGMENT = np.column_stack([np.linspace(-1, 1, 201), np.zeros(201)])

clouds = st.lists(
    st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=25
).map(lambda p: np.array(p, dtype=float))


def grid_for(points, r, s):
    lo, hi = points.min(0), points.max(0)
    return Grid2D.covering((lo[0] - 2 * r, lo[1] - 2 * r, hi[0] + 2 * r, hi[1] + 2 * r), s, pad=s)


def test_singleton_hull_is_its_cell():
    g = Grid2D.covering((-1, -1, 1, 1), 0.02, pad=0.02)
    for r in (0.05, 0.3):
        m = rconvex_hull([(0.0, 0.0)], r, g).mask
        j, i = g.cell_index(np.array([[0.0, 0.0]]))
        assert m.count == 1 and m.occupancy[j[0], i[0]]


def test_two_far_points_are_two_cells():
    pts = np.array([[0.0, 0.0], [1.0, 0.3]])
    r = 0.4
    g = grid_for(pts, r, 0.02)
    m = rconvex_hull(pts, r, g).mask
    assert m.count == 2
    oracle = MembershipOracle(pts, r, r / 20, g.bounds())
    ref = np.array([oracle(c) for c in g.centers()]).reshape(g.shape)
    # no cell centre is a member; the sample cells are occupied by convention
    assert not ref.any()
    j, i = g.cell_index(pts)
    ref[j, i] = True
    assert np.array_equal(ref, m.occupancy)


def test_membership_oracle_examples():
    assert rconvex_membership_oracle(SEGMENT, 0.5, (0.3, 0.0), 0.01)
    assert not rconvex_membership_oracle(SEGMENT, 0.5, (0, 0.4), 0.01)
    # an explicit witness: centre (0, 0.6) is 0.6 from the segment and 0.2 from the query
    assert np.hypot(*(SEGMENT - (0, 0.6)).T).min() >= 0.5 and math.hypot(0, 0.6 - 0.4) < 0.5
    # with samples 0.01 apart the hull dips between them by only 0.5 - sqrt(0.25 - 0.005^2) = 2.5e-5
    assert not rconvex_membership_oracle(SEGMENT, 0.5, (0, 0.005), 0.01)
    assert np.hypot(*(SEGMENT - (0.005, 0.5)).T).min() >= 0.5 and math.hypot(0.005, 0.495) < 0.5
    assert rconvex_membership_oracle(SEGMENT, 0.5, (0.005, 1e-6), 0.01)
    with pytest.raises(ValueError):
        rconvex_membership_oracle(SEGMENT, 0.5, (0, 0), 0.1)


def test_membership_oracle_against_ring_scan():
    rng = np.random.default_rng(0)
    pts = rng.random((12, 2))
    r = 0.3
    for q in rng.uniform(-0.3, 1.3, size=(40, 2)):
        assert rconvex_membership_oracle(pts, r, q, r / 40) == rconvex_bruteforce(pts, r, q)


def test_hull_rejects_coarse_grid_and_small_grid():
    g = Grid2D.covering((-1, -1, 1, 1), 0.1)
    with pytest.raises(ValueError, match="twice"):
        rconvex_hull([(0, 0)], 0.15, g)
    with pytest.raises(ValueError, match="cover"):
        rconvex_hull([(0, 0)], 0.8, g)


@settings(max_examples=25, deadline=None)
@given(clouds, st.floats(0.1, 0.5))
def test_hull_contains_samples_and_stays_near_convex_hull(pts, r):
    g = grid_for(pts, r, 0.025)
    m = rconvex_hull(pts, r, g).mask
    j, i = g.cell_index(pts)
    assert m.occupancy[j, i].all()
    # sanity envelope: occupied cells lie within one cell of the convex hull
    occ = m.occupied_centers()
    if len(np.unique(pts, axis=0)) >= 3 and np.linalg.matrix_rank(pts - pts[0]) == 2:
        tri = Delaunay(pts)
        outside = tri.find_simplex(occ) < 0
        d = np.array([_seg_dist(c, pts[tri.convex_hull]) for c in occ[outside]])
        assert (d <= g.spacing * math.sqrt(2)).all()


def _seg_dist(p, segs):
    a, b = segs[:, 0], segs[:, 1]
    ab = b - a
    t = np.clip(((p - a) * ab).sum(1) / np.maximum((ab**2).sum(1), 1e-300), 0, 1)
    return np.hypot(*(a + t[:, None] * ab - p).T).min()


@settings(max_examples=20, deadline=None)
@given(clouds, st.floats(0.08, 0.4), st.floats(0.08, 0.4))
def test_hull_monotone_in_r(pts, r1, r2):
    r1, r2 = sorted((r1, r2))
    g = grid_for(pts, r2, 0.02)
    a = rconvex_hull(pts, r1, g).mask.occupancy
    b = rconvex_hull(pts, r2, g).mask.occupancy
    assert not (a & ~b).any()


def test_convex_hull_limit():
    rng = np.random.default_rng(4)
    pts = rng.random((15, 2)) * 0.7
    s = 0.05
    r = 10 * 1.0
    g = grid_for(pts, r, s)
    m = rconvex_hull(pts, r, g).mask
    tri = Delaunay(pts)
    ref = tri.find_simplex(g.centers()).reshape(g.shape) >= 0
    diff = g.centers()[(m.occupancy ^ ref).ravel()]
    segs = pts[tri.convex_hull]
    assert all(_seg_dist(c, segs) <= s * math.sqrt(2) for c in diff)


def test_hull_boundary_polylines_closed():
    pts = np.random.default_rng(2).random((30, 2))
    res = rconvex_hull(pts, 0.3, grid_for(pts, 0.3, 0.02))
    assert res.boundary and all(np.allclose(b[0], b[-1]) for b in res.boundary)
    assert res.r == 0.3


def test_conservative_marking_is_larger():
    pts = np.random.default_rng(3).random((20, 2))
    g = grid_for(pts, 0.3, 0.02)
    cert = rconvex_hull(pts, 0.3, g).mask.occupancy
    cons = rconvex_hull(pts, 0.3, g, marking="conservative").mask.occupancy
    assert not (cert & ~cons).any()


def test_hausdorff_examples():
    A = np.array([[0.0, 0.0]])
    assert hausdorff(A, A) == 0
    assert hausdorff(A, [(3.0, 4.0)]) == 5.0
    with pytest.raises(ValueError):
        hausdorff(np.zeros((0, 2)), A)


def test_hausdorff_points_vs_disk_raster_equals_bruteforce():
    rng = np.random.default_rng(9)
    ang, rad = rng.uniform(0, 2 * np.pi, 10), np.sqrt(rng.random(10))
    A = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    g = Grid2D.covering((-1, -1, 1, 1), 0.01, pad=0.02)
    B = rasterize(disk_domain(), g)
    assert hausdorff(A, B) == hausdorff_bruteforce(A, B)


def test_hausdorff_mask_mask_matches_points():
    g = Grid2D.covering((-1, -1, 1, 1), 0.02, pad=0.02)
    a = rasterize(disk_domain(radius=0.5), g)
    b = rasterize(disk_domain((0.2, 0.1), 0.7), g)
    assert hausdorff(a, b) == pytest.approx(hausdorff_bruteforce(a.occupied_centers(), b.occupied_centers()), abs=1e-12)


pts3 = st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=12)


@given(pts3, pts3, pts3)
def test_hausdorff_metric_axioms(a, b, c):
    a, b, c = (np.array(x) for x in (a, b, c))
    dab, dba = hausdorff(a, b), hausdorff(b, a)
    assert dab == dba >= 0
    assert hausdorff(a, a) == 0
    assert hausdorff(a, c) <= dab + hausdorff(b, c) + 1e-9


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_measure_distance_axioms(seed):
    g = Grid2D((0, 0), 0.1, 12, 9)
    rng = np.random.default_rng(seed)
    A, B, C = (RegionMask(g, rng.random(g.shape) < 0.4) for _ in range(3))
    assert distance_in_measure(A, A) == 0
    assert distance_in_measure(A, B) == distance_in_measure(B, A)
    assert distance_in_measure(A, C) <= distance_in_measure(A, B) + distance_in_measure(B, C) + 1e-12


def test_distance_in_measure_disjoint_and_grid_mismatch():
    g = Grid2D((0, 0), 0.1, 10, 10)
    a = np.zeros(g.shape, bool)
    a[:3] = True
    b = np.zeros(g.shape, bool)
    b[5:] = True
    A, B = RegionMask(g, a), RegionMask(g, b)
    assert distance_in_measure(A, B) == pytest.approx(measure(A) + measure(B))
    with pytest.raises(ValueError):
        distance_in_measure(A, RegionMask(Grid2D((0, 0), 0.2, 10, 10), b))


def lens_symmetric_difference(d):
    lens = 2 * math.acos(d / 2) - (d / 2) * math.sqrt(4 - d * d)
    return 2 * (math.pi - lens)


def test_two_circle_symmetric_difference():
    g = Grid2D.covering((-1, -1, 1.5, 1), 0.005, pad=0.02)
    A = rasterize(disk_domain(), g)
    B = rasterize(disk_domain((0.5, 0.0), 1.0), g)
    exact = lens_symmetric_difference(0.5)
    assert abs(distance_in_measure(A, B) / exact - 1) < 0.01


def test_lens_formula_against_quadrature():
    # independent check of the oracle formula by a fine midpoint rule
    n = 4000
    x = np.linspace(-1, 1.5, n, endpoint=False) + 1.25 / n
    X, Y = np.meshgrid(x, np.linspace(-1, 1, n, endpoint=False) + 1 / n)
    a, b = X**2 + Y**2 <= 1, (X - 0.5) ** 2 + Y**2 <= 1
    area = (a ^ b).sum() * (2.5 / n) * (2 / n)
    assert area == pytest.approx(lens_symmetric_difference(0.5), rel=2e-3)


def near_boundary(mask, cells):
    """Cells within ``cells`` grid steps of the other class."""
    s = 1.0
    din = ndimage.distance_transform_edt(mask, sampling=s)
    dout = ndimage.distance_transform_edt(~mask, sampling=s)
    return np.where(mask, din, dout) <= cells


def oracle_agreement(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 31))
    pts = rng.random((n, 2))
    r = float(rng.uniform(0.2, 1.0))
    extent = 1 + 4 * r
    s = max(extent / 120, r / 8)
    g = grid_for(pts, r, s)
    assert g.nx <= 200 and g.ny <= 200
    got = rconvex_hull(pts, r, g).mask.occupancy
    oracle = MembershipOracle(pts, r, r / 20, g.bounds())
    ref = np.array([oracle(c) for c in g.centers()]).reshape(g.shape)
    # samples are members by definition; cell-centre queries may miss them by up to a half cell
    j, i = g.cell_index(pts)
    ref[j, i] = True
    bad = (got ^ ref) & ~near_boundary(ref, 2)
    return int(bad.sum())


@pytest.mark.parametrize("seed", range(5))
def test_hull_agrees_with_oracle(seed):
    assert oracle_agreement(seed) == 0

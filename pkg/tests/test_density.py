import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import in_study_set, stationary_draws, study_normalizer_mc
from homerange.contour import marching_squares
from homerange.density import (
    DensityField,
    KernelSpec,
    contour_hausdorff,
    drift_estimate,
    kde,
    level_region,
    level_set_contours,
    mass_quantile_level,
    true_density,
)
from homerange.geometry import Grid2D, inner_parallel_set, study_domain

S = study_domain()


def ngon(radius, n=64, center=(0.0, 0.0)):
    t = 2 * np.pi * np.arange(n + 1) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


@pytest.fixture(scope="module")
def study_grid():
    return Grid2D.covering(S.bbox, 0.02, pad=1.4)


@pytest.fixture(scope="module")
def g_true(study_grid):
    return true_density(S, "quadratic", study_grid)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("box")
    with pytest.raises(ValueError):
        KernelSpec(bandwidth=0)


@pytest.mark.parametrize("family", ["gaussian", "epanechnikov"])
def test_kernel_integrates_to_one(family):
    k = KernelSpec(family, 1.0)
    x = np.linspace(-6, 6, 1201)
    X, Y = np.meshgrid(x, x)
    vals = k.profile(X**2 + Y**2)
    assert vals.min() >= 0
    assert vals.sum() * (x[1] - x[0]) ** 2 == pytest.approx(1.0, abs=2e-3)


def test_kde_single_sample_peak():
    g = Grid2D((-1.0, -1.0), 0.1, 21, 21)
    for family, k0 in (("gaussian", 1 / (2 * math.pi)), ("epanechnikov", 2 / math.pi)):
        f = kde([(0.0, 0.0)], KernelSpec(family, 0.2), g)
        assert f.at((0.0, 0.0)) == pytest.approx(k0 / 0.04, rel=1e-12)


def test_kde_gaussian_matches_direct_sum():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 2))
    g = Grid2D((-2, -2), 0.1, 41, 41)
    k = KernelSpec("gaussian", 0.3)
    X, Y = g.mesh()
    ref = sum(k.profile(((X - p[0]) ** 2 + (Y - p[1]) ** 2) / 0.09) for p in pts) / (50 * 0.09)
    assert np.allclose(kde(pts, k, g).values, ref, rtol=1e-10, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(["gaussian", "epanechnikov"]))
def test_kde_translation_equivariance(vx, vy, family):
    pts = np.random.default_rng(1).normal(size=(20, 2))
    g = Grid2D((-2, -2), 0.1, 41, 41)
    g2 = Grid2D((-2 + vx, -2 + vy), 0.1, 41, 41)
    k = KernelSpec(family, 0.4)
    a = kde(pts, k, g).values
    b = kde(pts + (vx, vy), k, g2).values
    assert np.allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("family", ["gaussian", "epanechnikov"])
def test_kde_mass(family):
    pts = np.random.default_rng(2).normal(scale=0.3, size=(300, 2))
    h = 0.2
    g = Grid2D.covering((pts.min(), pts.min(), pts.max(), pts.max()), 0.01, pad=6 * h)
    m = kde(pts, KernelSpec(family, h), g).mass()
    if family == "gaussian":
        assert m >= 0.99
    else:
        assert m == pytest.approx(1.0, abs=5e-3)


def test_kde_rejects_empty():
    with pytest.raises(ValueError):
        kde(np.zeros((0, 2)), KernelSpec(), Grid2D((0, 0), 1, 2, 2))


def test_true_density_normalized_and_supported(g_true, study_grid):
    assert g_true.mass() == pytest.approx(1.0, abs=1e-3)
    X, Y = study_grid.mesh()
    assert (g_true.values[~in_study_set(X, Y)] == 0).all()
    assert (g_true.values >= 0).all()


def test_true_density_ratio(g_true):
    a, b = (0.0, -0.5), (-1.0, 0.3)
    ga, gb = g_true.at(a), g_true.at(b)
    ca = study_grid_center(g_true, a)
    cb = study_grid_center(g_true, b)
    f = lambda p: p[0] ** 2 + p[1] ** 2
    assert ga / gb == pytest.approx(math.exp(f(cb) - f(ca)), rel=1e-12)


def study_grid_center(field, p):
    j, i = field.grid.cell_index(np.array([p]))
    return field.grid.origin[0] + i[0] * field.grid.spacing, field.grid.origin[1] + j[0] * field.grid.spacing


def test_true_density_normalizer_against_monte_carlo():
    g = Grid2D.covering(S.bbox, 0.005, pad=0.01)
    c = true_density(S, "quadratic", g).provenance["normalizer"]
    assert c == pytest.approx(study_normalizer_mc(), rel=5e-3)


def test_true_density_empty_domain_errors():
    with pytest.raises(ValueError):
        true_density(S, "quadratic", Grid2D((10, 10), 0.1, 5, 5))
    with pytest.raises(ValueError):
        true_density(S, "nonsense", Grid2D((0, 0), 0.1, 5, 5))


def test_kde_sup_error_on_interior(g_true, study_grid):
    # no boundary correction: the comparison region stays two bandwidths inside S
    inner = inner_parallel_set(S, 0.4, study_grid).occupancy
    pts = stationary_draws(10_000, seed=0)
    err = np.abs(kde(pts, KernelSpec(bandwidth=0.2), study_grid).values - g_true.values)
    assert err[inner].max() < 0.15 * g_true.values.max()


def test_unit_circle_contour():
    g = Grid2D.covering((-2, -2, 2, 2), 0.01)
    X, Y = g.mesh()
    f = DensityField(g, np.exp(-(X**2 + Y**2)))
    loops = level_set_contours(f, math.exp(-1))
    assert len(loops) == 1
    rad = np.hypot(*loops[0].T)
    assert np.abs(rad - 1).max() < 2 * g.spacing
    assert level_set_contours(f, 2.0) == []
    with pytest.raises(ValueError):
        level_set_contours(f, 0.0)


def test_marching_squares_saddle_and_closure():
    g = Grid2D((0, 0), 1.0, 3, 3)
    v = np.array([[0, 0, 0], [0, 1, 0], [0, 0, 0]], float)
    loops = marching_squares(v, g, 0.5)
    assert len(loops) == 1 and np.allclose(loops[0][0], loops[0][-1])
    # checkerboard saddle: average above level joins the two high corners
    v = np.array([[1, 0], [0, 1]], float)
    loops = marching_squares(v, Grid2D((0, 0), 1.0, 2, 2), 0.4)
    assert len(loops) == 1
    loops = marching_squares(v, Grid2D((0, 0), 1.0, 2, 2), 0.6)
    assert len(loops) == 2


def test_half_mass_contour_avoids_removed_disk(g_true):
    lam = mass_quantile_level(g_true, 0.5)
    loops = level_set_contours(g_true, lam)
    verts = np.vstack(loops)
    # the level set meets the hole, so vertices interpolated across it may sit up to one cell inside
    assert (np.hypot(verts[:, 0] - 0.8, verts[:, 1]) >= 0.5 - g_true.grid.spacing).all()
    assert not in_study_set(*verts.T).all()  # the contour does follow the hole's edge
    mass = g_true.values[level_region(g_true, lam)].sum() * g_true.grid.spacing**2
    assert mass == pytest.approx(0.5, abs=0.01)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_level_set_nesting(l1, l2):
    g = Grid2D.covering(S.bbox, 0.02, pad=0.1)
    f = true_density(S, "quadratic", g)
    l1, l2 = sorted((l1, l2))
    assert not (level_region(f, l2) & ~level_region(f, l1)).any()


def test_contour_hausdorff_examples():
    a = [ngon(1.0)]
    assert contour_hausdorff(a, a) == 0
    assert contour_hausdorff(a, [ngon(1.1)]) == pytest.approx(0.1, abs=0.005)
    with pytest.raises(ValueError):
        contour_hausdorff([], a)


def test_contour_hausdorff_uses_segments():
    # a vertex-only distance would see 0.5; the segment refinement sees 0
    a = [np.array([[0, 0], [1, 0], [1, 1], [0, 0]], float)]
    b = [np.array([[0.5, 0], [1, 0], [1, 1], [0.5, 0.5], [0, 0], [0.5, 0]], float)]
    assert contour_hausdorff(a, b) == pytest.approx(0.0, abs=1e-12)


def test_drift_on_true_field():
    g = Grid2D.covering(S.bbox, 0.005, pad=0.02)
    f = true_density(S, "quadratic", g)
    assert drift_estimate(f, (0.5, -0.5)) == pytest.approx((-0.5, 0.5), abs=1e-3)
    const = DensityField(g, np.ones(g.shape))
    assert drift_estimate(const, (0.1, 0.2)) == pytest.approx((0, 0), abs=1e-12)
    with pytest.raises(ValueError, match="too small"):
        drift_estimate(f, (0.8, 0.0))


def _quartic_max_error(spacing, probes):
    g = Grid2D.covering((-1, -1, 1, 1), spacing, pad=0.05)
    X, Y = g.mesh()
    f = DensityField(g, np.exp(-(X**4 + Y**4)))
    return max(np.abs(drift_estimate(f, p) + 2 * np.asarray(p) ** 3).max() for p in probes)


def test_drift_error_is_second_order():
    # central differences are exact for quadratics, so a quartic potential exposes the O(s^2) term
    probes = [(x, y) for x in (-0.6, 0.0, 0.35, 0.7) for y in (-0.55, 0.2, 0.65)]
    e1 = _quartic_max_error(0.02, probes)
    e2 = _quartic_max_error(0.01, probes)
    assert e1 / e2 >= 3


def test_drift_from_kde(study_grid):
    inner = inner_parallel_set(S, 0.4, study_grid)
    rng = np.random.default_rng(5)
    probes = inner.occupied_centers()[rng.choice(inner.count, 25, replace=False)] + 0.003
    f = kde(stationary_draws(20_000, seed=1), KernelSpec(bandwidth=0.2), study_grid)
    errs = [np.linalg.norm(drift_estimate(f, p) + p) for p in probes]
    assert np.mean(errs) < 0.25

from __future__ import annotations

import numpy as np
import pytest

from affinelab.catalog import catalog_get
from affinelab.tube import (
    TubeChart,
    TubeInversionError,
    build_tube_chart,
    condition4_check,
    flat_hessian,
    geodesic_check,
    half_shape_identity,
    level_function_data,
    newton_invert,
    tube_christoffel,
    tube_metric,
    tube_sample,
)

ORIGIN = np.zeros(2)


@pytest.fixture(scope="module")
def sphere_chart():
    return TubeChart(catalog_get("sphere(1)").immersion, ORIGIN, 1.0)


@pytest.fixture(scope="module")
def paraboloid_chart():
    return TubeChart(catalog_get("paraboloid").immersion, ORIGIN, 1.0)


def c_sphere(mu):
    return (1 - mu) ** -0.5


def c_prime_sphere(mu):
    return 0.5 * (1 - mu) ** -1.5


@pytest.mark.parametrize("mu", [-0.25, 0.0, 0.25, 0.5])
def test_c_fit_matches_closed_form(sphere_chart, mu):
    assert sphere_chart.c(mu) == pytest.approx(c_sphere(mu), abs=1e-9)
    assert sphere_chart.c_prime(mu) == pytest.approx(c_prime_sphere(mu), abs=1e-6)


def test_build_tube_chart_half_width():
    entry = catalog_get("sphere(1)")
    chart = build_tube_chart(entry.immersion, entry.center, entry.grid(3))
    assert chart.delta == pytest.approx(0.95)


def test_sphere_tube_metric(sphere_chart):
    m = tube_metric(sphere_chart, ORIGIN, 0.5)
    c = c_sphere(0.5)
    np.testing.assert_allclose(m.g[:2, :2], (0.5 / c) * np.eye(2), atol=1e-12)
    assert m.g[2, 2] == pytest.approx(0.5, abs=1e-12)
    assert m.sqrt_det == pytest.approx(0.25, abs=1e-12)
    assert m.frame_volume == pytest.approx(0.25, abs=1e-12)


def test_paraboloid_tube_metric_flat(paraboloid_chart):
    m = tube_metric(paraboloid_chart, ORIGIN, 0.3)
    np.testing.assert_allclose(m.g, np.eye(3), atol=1e-12)
    formula, lc, gap = tube_christoffel(paraboloid_chart, ORIGIN, 0.3)
    assert np.abs(formula).max() <= 1e-9
    assert np.abs(lc).max() <= 1e-9
    assert gap <= 1e-9


def test_sphere_formula_christoffels(sphere_chart):
    formula, _, _ = tube_christoffel(sphere_chart, ORIGIN, 0.0)
    np.testing.assert_allclose(formula[2, :2, :2], 0.5 * np.eye(2), atol=1e-12)
    formula, _, _ = tube_christoffel(sphere_chart, ORIGIN, 0.5)
    assert formula[2, 2, 2] == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.parametrize("mu", [0.0, 0.25, 0.5])
def test_levi_civita_route_carries_c_prime_terms(sphere_chart, mu):
    """The connection of the tube metric picks up c' terms the closed form omits.

    From g = G^mu + c^-2 dmu^2 with G^mu = (1 - mu) G / c on the sphere:
    Gamma^mu_ij = (c c' G^mu_ij + c B_ij) / 2 and
    Gamma^i_{mu j} = -(c'/(2c)) delta - B^mu / (2c).
    """
    formula, lc, gap = tube_christoffel(sphere_chart, ORIGIN, mu)
    m = tube_metric(sphere_chart, ORIGIN, mu)
    rec = m.record
    c, cp = c_sphere(mu), c_prime_sphere(mu)
    want_mu_ij = 0.5 * (c * cp * m.G_mu + c * rec.frame.B_cov)
    want_i_muj = -(cp / (2 * c)) * np.eye(2) - rec.frame_mu.B_mixed / (2 * c)
    np.testing.assert_allclose(lc[2, :2, :2], want_mu_ij, atol=1e-6)
    np.testing.assert_allclose(lc[:2, 2, :2], want_i_muj, atol=1e-6)
    np.testing.assert_allclose(lc[:2, :2, :2], formula[:2, :2, :2], atol=1e-8)
    assert lc[2, 2, 2] == pytest.approx(formula[2, 2, 2], abs=1e-6)
    assert gap == pytest.approx(max(0.5 * c * cp * m.G_mu[0, 0], cp / (2 * c)), abs=1e-6)


def test_level_function_sphere(sphere_chart):
    for mu in (0.0, 0.25, 0.5):
        lf = level_function_data(sphere_chart, (0.1, -0.2), mu)
        assert lf.norm == pytest.approx(c_sphere(mu), abs=1e-9)
        assert lf.lap_formula == pytest.approx(-0.5 * (1 - mu) ** -2, abs=1e-6)
        # divergence form: Delta F = d_mu(c^2 sqrt g) / sqrt g, and c^2 sqrt g is proportional to 1 - mu
        assert lf.lap_levi_civita == pytest.approx(-((1 - mu) ** -2), abs=1e-6)
        assert lf.residuals["grad_vs_cY_mu"] <= 1e-9


def test_levi_civita_laplacian_matches_divergence_form():
    entry = catalog_get("titeica")
    chart = TubeChart(entry.immersion, entry.center, 1.0)
    u, mu, h = entry.center + 0.1, 0.2, 1e-3
    lf = level_function_data(chart, u, mu)

    def flux(m):
        # sqrt(det g) g^{mu mu}, with g^{mu mu} = c^2
        g = tube_metric(chart, u, m).g
        return np.sqrt(np.linalg.det(g)) / g[2, 2]

    sqrt_g = np.sqrt(np.linalg.det(tube_metric(chart, u, mu).g))
    div = (flux(mu + h) - flux(mu - h)) / (2 * h) / sqrt_g
    assert lf.lap_levi_civita == pytest.approx(div, abs=1e-5)


def test_laplacian_constant_on_level_sets(sphere_chart):
    grid = catalog_get("sphere(1)").grid(3, 0.75)
    for mu in (0.25, 0.5):
        laps = [level_function_data(sphere_chart, u, mu).lap_formula for u in grid]
        assert np.ptp(laps) <= 1e-7


def test_paraboloid_laplacian_zero(paraboloid_chart):
    lf = level_function_data(paraboloid_chart, (0.3, 0.1), 0.4)
    assert abs(lf.lap_formula) <= 1e-9
    assert abs(lf.lap_levi_civita) <= 1e-9


def test_newton_inversion(sphere_chart, paraboloid_chart):
    u, mu = newton_invert(sphere_chart, (0.0, 0.0, 0.6))
    assert mu == pytest.approx(0.4, abs=1e-12)
    np.testing.assert_allclose(u, [0, 0], atol=1e-12)
    _, mu = newton_invert(paraboloid_chart, (0.1, 0.2, 1.0))
    assert mu == pytest.approx(0.975, abs=1e-12)
    with pytest.raises(TubeInversionError):
        newton_invert(sphere_chart, (50.0, -40.0, -30.0))


def test_paraboloid_flat_hessian(paraboloid_chart):
    fh = flat_hessian(paraboloid_chart, (0.1, 0.2), 0.3)
    np.testing.assert_allclose(fh.ambient, np.diag([-1.0, -1.0, 0.0]), atol=1e-5)
    assert fh.null_angle <= 1e-5
    assert fh.route_discrepancy <= 1e-4


def test_sphere_flat_hessian(sphere_chart):
    fh = flat_hessian(sphere_chart, ORIGIN, 0.5)
    np.testing.assert_allclose(np.sort(fh.eigenvalues), [-2.0, -2.0, 0.0], atol=1e-5)
    assert fh.null_angle <= 1e-5
    assert fh.route_discrepancy <= 1e-4


def test_condition4_routes(sphere_chart, paraboloid_chart):
    res = condition4_check(paraboloid_chart, (0.2, 0.1), 0.3)
    assert res["formula"] <= 1e-9 and res["levi_civita"] <= 1e-9
    res = condition4_check(sphere_chart, (0.1, 0.1), 0.25)
    assert res["formula"] <= 1e-6
    assert res["formula_mu_component"] <= 1e-8
    # the true connection leaves a residual of exactly c' in the tangential block
    assert res["levi_civita"] == pytest.approx(c_prime_sphere(0.25), abs=1e-6)


def test_half_shape_routes(sphere_chart, paraboloid_chart):
    res = half_shape_identity(paraboloid_chart, (0.2, 0.1), 0.3)
    assert res["formula"] <= 1e-9 and res["levi_civita"] <= 1e-9
    res = half_shape_identity(sphere_chart, ORIGIN, 0.0)
    assert res["formula"] <= 1e-9
    # Levi-Civita shape operator is B^mu/2 + (c'/2) id
    assert res["levi_civita"] == pytest.approx(0.25, abs=1e-6)
    res = half_shape_identity(sphere_chart, ORIGIN, 0.5)
    assert res["formula_trace_ratio"] == pytest.approx(0.5, abs=1e-6)


def test_mu_lines_are_geodesics(sphere_chart):
    res = geodesic_check(sphere_chart, (0.1, 0.2), 0.25)
    assert res["ambient_second_derivative"] <= 1e-12
    assert res["geodesic"] <= 1e-6
    assert res["unit_speed"] <= 1e-9


def test_tube_sample_keys(sphere_chart):
    s = tube_sample(sphere_chart, ORIGIN, 0.25)
    for key in (
        "volume_surrogate",
        "norm_gradF",
        "lap_routes",
        "christoffel_routes",
        "condition4_formula",
        "condition4_levi_civita",
        "half_shape_formula",
        "half_shape_levi_civita",
        "metric_hessian_formula",
        "metric_hessian_numeric",
        "hessian_routes",
        "null_angle",
    ):
        assert key in s.conditions
    assert s.conditions["metric_hessian_numeric"] <= 1e-5
    assert s.conditions["metric_hessian_formula"] <= 1e-12

from __future__ import annotations

import numpy as np
import pytest

from affinelab.catalog import UnknownSurface, catalog_get, catalog_names, grid_points, oracle_check
from affinelab.invariants import frame_point


def test_names_resolve():
    for name in ("paraboloid", "sphere(1)", "sphere(2, 3)", "ellipsoid", "ellipsoid(4, 0.5, 0.5)", "titeica", "perturbed", "perturbed(0.2)", "custom:u^2 + v^2"):
        assert catalog_get(name).immersion is not None
    assert "titeica" in catalog_names()


@pytest.mark.parametrize("name", ["nosuch", "sphere(a)", "sphere(1,2,3,4)", "custom:u^2 +"])
def test_unknown_or_malformed(name):
    with pytest.raises(ValueError):
        catalog_get(name)


def test_ellipsoid_requires_unit_volume():
    with pytest.raises(ValueError):
        catalog_get("ellipsoid(1, 1, 2)")


def test_sphere_north_pole_normal():
    fp = frame_point(catalog_get("sphere(1)").immersion, (0.0, 0.0))
    np.testing.assert_allclose(fp.Y, [0, 0, -1], atol=1e-14)


def test_expected_verdicts():
    assert catalog_get("paraboloid").expected_verdict is True
    assert catalog_get("perturbed(0.1)").expected_verdict is False
    assert catalog_get("custom:u^2+v^2").expected_verdict is None


def test_sphere_oracle_check():
    entry = catalog_get("sphere(1)")
    res = oracle_check(entry, grid_points([(-0.3, 0.3)] * 2, (5, 5)))
    assert res["lambda"] <= 1e-8
    assert res["Y"] <= 1e-8
    assert res["c"] <= 1e-9
    assert res["F"] <= 1e-9


def test_paraboloid_oracle_check():
    entry = catalog_get("paraboloid")
    res = oracle_check(entry, entry.grid(3))
    for key, val in res.items():
        assert val <= 1e-12, key


def test_titeica_centered():
    entry = catalog_get("titeica")
    res = oracle_check(entry, entry.grid(4))
    assert res["Y_position_angle"] <= 1e-7
    assert res["lambda_equal"] <= 1e-8
    assert res["lambda_spread"] <= 1e-8


def test_ellipsoid_matches_sphere():
    sph = catalog_get("sphere(1)")
    ell = catalog_get("ellipsoid")
    for u in sph.grid(3, 0.75):
        a, b = frame_point(sph.immersion, u), frame_point(ell.immersion, u)
        np.testing.assert_allclose(a.lam, b.lam, atol=1e-7)
        assert a.A_norm2 == pytest.approx(b.A_norm2, abs=1e-7)


def test_grid_and_domain():
    entry = catalog_get("sphere(2)")
    assert entry.chart_domain == ((-0.8, 0.8), (-0.8, 0.8))
    pts = entry.grid((2, 3))
    assert len(pts) == 6
    assert all(entry.contains(p) for p in pts)
    assert not entry.contains((0.9, 0.0))

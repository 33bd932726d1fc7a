from __future__ import annotations

import numpy as np
import pytest

from affinelab.catalog import catalog_get
from affinelab.detector import (
    ELLIPTIC,
    HYPERBOLIC,
    ISOPARAMETRIC,
    NOT_ISOPARAMETRIC,
    PARABOLIC,
    constant_principal_detector,
    default_mu_samples,
    hypersphere_type,
    power_sums_from_fit,
)
from affinelab.invariants import transform_immersion


def run(name, counts=3, shrink=0.75):
    entry = catalog_get(name)
    return constant_principal_detector(entry.immersion, entry.grid(counts, shrink))


def test_sphere_certificate():
    rep = run("sphere(1)")
    assert rep.verdict == ISOPARAMETRIC
    np.testing.assert_allclose(rep.certificate["lambda"], [1.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(rep.certificate["power_sums"], [2.0, 2.0], atol=1e-4)
    assert rep.certificate["hypersphere"] == ELLIPTIC


def test_paraboloid_parabolic():
    rep = run("paraboloid")
    assert rep.verdict == ISOPARAMETRIC
    assert rep.certificate["hypersphere"] == PARABOLIC
    np.testing.assert_allclose(rep.certificate["lambda"], [0.0, 0.0], atol=1e-12)


def test_titeica_hyperbolic():
    rep = run("titeica")
    assert rep.verdict == ISOPARAMETRIC
    assert rep.certificate["hypersphere"] == HYPERBOLIC
    lam = rep.certificate["lambda"][0]
    # p_2 = 2 lambda^2 for two equal curvatures
    assert rep.certificate["power_sums"][1] == pytest.approx(2 * lam * lam, abs=1e-4)


def test_perturbed_rejected():
    rep = run("perturbed(0.1)", shrink=1.0)
    assert rep.verdict == NOT_ISOPARAMETRIC
    assert rep.route_a == rep.route_b
    assert max(rep.lambda_spreads) > 1e-2
    assert rep.certificate == {}


def test_verdict_invariant_under_unimodular_map():
    entry = catalog_get("sphere(1)")
    S = np.array([[2.0, 0.3, 0.0], [0.0, 0.5, 0.1], [0.0, 0.0, 1.0]])
    img = transform_immersion(entry.immersion, S, np.array([0.5, 0.0, -1.0]))
    rep = constant_principal_detector(img, entry.grid(3, 0.75))
    assert rep.verdict == ISOPARAMETRIC
    np.testing.assert_allclose(rep.certificate["lambda"], [1.0, 1.0], atol=1e-9)


def test_power_sum_fit_on_exact_series():
    lam = np.array([0.3, -0.7])
    mu = default_mu_samples(2, [lam])
    vals = [np.sum(lam / (1 - m * lam)) for m in mu]
    p = power_sums_from_fit(mu, vals, 2)
    np.testing.assert_allclose(p, [lam.sum(), (lam**2).sum()], atol=1e-6)


def test_mu_samples_and_types():
    mu = default_mu_samples(2, [[10.0, 10.0]])
    assert len(mu) == 6 and np.abs(mu).max() <= 0.5 * 0.95 / 10
    assert hypersphere_type(0.5) == ELLIPTIC
    assert hypersphere_type(-0.5) == HYPERBOLIC
    assert hypersphere_type(1e-9) == PARABOLIC
    with pytest.raises(ValueError):
        constant_principal_detector(catalog_get("sphere(1)").immersion, [np.zeros(2)], mu_samples=[0.0, 0.01])

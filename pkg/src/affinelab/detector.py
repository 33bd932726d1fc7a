"""Constant affine principal curvature detector.

Two independent routes decide whether the principal curvatures are constant
over a parameter grid:

* direct: spread of each sorted ``lambda_i`` over the grid;
* power sums: ``mu -> n L1^mu(mu) / c(mu) = sum_i lambda_i / (1 - mu lambda_i)``
  is sampled on a small window around ``mu = 0`` and fitted by a polynomial of
  degree ``n + 1``.  Its Taylor coefficient of ``mu^(k-1)`` is the power sum
  ``p_k = sum_i lambda_i^k``; the coefficient equals the ``(k-1)``-th
  derivative at 0 divided by ``(k-1)!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .invariants import Immersion, frame_point
from .parallel import admissible_delta, parallel_record
from .tolerances import (
    CONSTANT,
    GRAY,
    INCONCLUSIVE,
    LOOSE,
    NON_CONSTANT,
    classify_samples,
)

ISOPARAMETRIC = "isoparametric"
NOT_ISOPARAMETRIC = "not_isoparametric"

POWER_SUM_WINDOW = 0.02
ELLIPTIC, PARABOLIC, HYPERBOLIC = "elliptic", "parabolic", "hyperbolic"


def default_mu_samples(n: int, lams: Sequence[Sequence[float]], window: float = POWER_SUM_WINDOW) -> np.ndarray:
    """``2(n+1)`` Chebyshev points on ``[-w, w]`` with ``w`` inside the admissible range."""
    lo, hi = admissible_delta(lams)
    w = min(window, 0.5 * hi, 0.5 * abs(lo))
    m = 2 * (n + 1)
    k = np.arange(m)
    return w * np.cos(np.pi * (k + 0.5) / m)


def power_sums_from_fit(mu: Sequence[float], values: Sequence[float], n: int) -> np.ndarray:
    """``p_1 .. p_n`` from a degree ``n + 1`` least-squares fit of ``sum lambda/(1 - mu lambda)``."""
    poly = np.polynomial.Polynomial.fit(mu, values, n + 1).convert()
    out = []
    d = poly
    for k in range(1, n + 1):
        out.append(float(d(0.0)) / math.factorial(k - 1))
        d = d.deriv()
    return np.array(out)


def hypersphere_type(lam: float, tol: float = LOOSE) -> str:
    if lam > tol:
        return ELLIPTIC
    if lam < -tol:
        return HYPERBOLIC
    return PARABOLIC


@dataclass
class DetectorReport:
    verdict: str
    route_a: str
    route_b: str
    lambda_spreads: list[float]
    lambda_verdicts: list[str]
    power_sum_spreads: list[float]
    power_sum_verdicts: list[str]
    certificate: dict = field(default_factory=dict)
    power_sums: np.ndarray | None = field(default=None, repr=False)
    lambdas: np.ndarray | None = field(default=None, repr=False)

    @property
    def isoparametric(self) -> bool:
        return self.verdict == ISOPARAMETRIC


def _combine(verdicts: Sequence[str]) -> str:
    if all(v == CONSTANT for v in verdicts):
        return CONSTANT
    if any(v == NON_CONSTANT for v in verdicts):
        return NON_CONSTANT
    return INCONCLUSIVE


def constant_principal_detector(
    base: Immersion,
    grid: Sequence[Sequence[float]],
    mu_samples: Sequence[float] | None = None,
    order: int = 8,
    loose: float = LOOSE,
    gray: float = GRAY,
) -> DetectorReport:
    """Decide whether the affine principal curvatures are constant on ``grid``."""
    n = base.n
    grid = [np.asarray(u, dtype=float) for u in grid]
    lams = np.array([frame_point(base, u).lam for u in grid])

    lam_stats = [classify_samples(lams[:, i], loose, gray) for i in range(n)]
    route_a = _combine([v for _, v in lam_stats])

    if mu_samples is None:
        mu_samples = default_mu_samples(n, lams)
    mu_samples = np.asarray(mu_samples, dtype=float)
    if len(mu_samples) < 2 * (n + 1):
        raise ValueError(f"power-sum route needs at least {2 * (n + 1)} mu samples")
    sums = []
    for u in grid:
        vals = []
        for mu in mu_samples:
            rec = parallel_record(base, u, mu, order)
            vals.append(n * rec.frame_mu.L1 / rec.c)
        sums.append(power_sums_from_fit(mu_samples, vals, n))
    sums = np.array(sums)
    ps_stats = [classify_samples(sums[:, k], loose, gray) for k in range(n)]
    route_b = _combine([v for _, v in ps_stats])

    if route_a == route_b == CONSTANT:
        verdict = ISOPARAMETRIC
    elif route_a == route_b == NON_CONSTANT:
        verdict = NOT_ISOPARAMETRIC
    else:
        verdict = INCONCLUSIVE

    certificate: dict = {}
    if verdict == ISOPARAMETRIC:
        lam_mean = lams.mean(axis=0)
        certificate["lambda"] = [float(v) for v in lam_mean]
        certificate["power_sums"] = [float(v) for v in sums.mean(axis=0)]
        if float(np.ptp(lam_mean)) <= loose * (1.0 + float(np.abs(lam_mean).max())):
            certificate["hypersphere"] = hypersphere_type(float(lam_mean.mean()), loose)
    return DetectorReport(
        verdict,
        route_a,
        route_b,
        [s for s, _ in lam_stats],
        [v for _, v in lam_stats],
        [s for s, _ in ps_stats],
        [v for _, v in ps_stats],
        certificate,
        sums,
        lams,
    )


__all__ = [
    "ISOPARAMETRIC",
    "NOT_ISOPARAMETRIC",
    "INCONCLUSIVE",
    "ELLIPTIC",
    "PARABOLIC",
    "HYPERBOLIC",
    "DetectorReport",
    "constant_principal_detector",
    "default_mu_samples",
    "hypersphere_type",
    "power_sums_from_fit",
]

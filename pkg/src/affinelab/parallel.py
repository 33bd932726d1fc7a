"""Equiaffine parallel hypersurfaces ``x^mu = x + mu Y``.

The parallel hypersurface is evaluated in the same chart ``u`` as the base
immersion, so its tensors are automatically expressed in the pushed basis
``x^mu_i = sum_j T^j_i x_j`` with ``T = I - mu B``.  All identities below are
checked in that basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .invariants import (
    FramePoint,
    GeometryError,
    Immersion,
    frame_from_jets,
    normal_data,
    principal_curvatures,
    shape_operator,
    tangent_values,
)
from .jets import Jet, JetVector, values
from .tolerances import (
    CONSTANT,
    GRAY,
    INCONCLUSIVE,
    LOOSE,
    MU_MARGIN,
    NON_CONSTANT,
    classify_samples,
)

DEFAULT_MU = (-0.25, 0.1, 0.25, 0.5)
PARALLEL_ORDER = 8


class InadmissibleMu(GeometryError):
    """Some ``1 - mu * lambda_i`` is below the admissibility margin."""


@dataclass
class ParallelParams:
    mu_values: list[float] = field(default_factory=lambda: list(DEFAULT_MU))
    order: int = PARALLEL_ORDER
    margin: float = MU_MARGIN
    admissible_range: tuple[float, float] | None = None

    def admissible(self, lams: Sequence[Sequence[float]]) -> list[float]:
        """Filter ``mu_values`` by the margin and, if set, ``admissible_range``."""
        out = admissible_mu(self.mu_values, lams, self.margin)
        if self.admissible_range is not None:
            lo, hi = self.admissible_range
            out = [m for m in out if lo <= m <= hi]
        return out


def check_admissible(mu: float, lam: Sequence[float], margin: float = MU_MARGIN) -> None:
    worst = min(1.0 - mu * l for l in lam)
    if worst < margin:
        raise InadmissibleMu(
            f"mu={mu:g} is not admissible: min(1 - mu*lambda) = {worst:.4g} < {margin}"
        )


def admissible_mu(mu_values: Sequence[float], lams: Sequence[Sequence[float]], margin: float = MU_MARGIN) -> list[float]:
    """Keep the ``mu`` values with ``1 - mu*lambda_i >= margin`` at every sample."""
    lams = np.asarray(lams, dtype=float).ravel()
    return [mu for mu in mu_values if np.all(1.0 - mu * lams >= margin)]


def admissible_delta(lams: Sequence[Sequence[float]], margin: float = MU_MARGIN) -> tuple[float, float]:
    """Interval of admissible ``mu`` for the sampled principal curvatures."""
    lams = np.asarray(lams, dtype=float).ravel()
    pos = lams[lams > 0]
    neg = lams[lams < 0]
    hi = (1.0 - margin) / pos.max() if pos.size else math.inf
    lo = (1.0 - margin) / neg.min() if neg.size else -math.inf
    return lo, hi


def parallel_jets(base: Immersion, coords: Sequence[Jet], mu, margin: float | None = MU_MARGIN) -> tuple[JetVector, JetVector]:
    """Jets of ``x + mu Y`` and of ``Y`` for coordinate jets ``coords``.

    ``mu`` may be a float or a jet in the coordinate ring (tube charts).  The
    result has three orders less than ``coords``.
    """
    x = base.jets(coords)
    n = base.n
    u0 = np.array([c.value for c in coords[:n]])
    frame, metric, Y, _ = normal_data(x, n, u0, base.hint(u0, tangent_values(x, n)))
    mu0 = mu.value if isinstance(mu, Jet) else float(mu)
    if margin is not None and Y.order >= 1:
        _, B_cov, _ = shape_operator(frame, metric, Y)
        check_admissible(mu0, principal_curvatures(values(B_cov), values(metric.G)), margin)
    if isinstance(mu, Jet):
        mu = mu.truncate(Y.order)
    return x.truncate(Y.order) + Y * mu, Y


def parallel_immersion(base: Immersion, mu: float, margin: float | None = MU_MARGIN) -> Immersion:
    """The hypersurface ``u -> x(u) + mu Y(u)`` (constant ``mu``)."""

    def func(coords):
        return parallel_jets(base, coords, mu, margin)[0].components

    def hint(u):
        x = base.evaluate(u, 3)
        return normal_data(x, base.n, u, base.hint(np.asarray(u), tangent_values(x, base.n)))[2].value()

    return Immersion(base.n, func, hint, 1, f"{base.name}^({mu:g})")


@dataclass
class ParallelRecord:
    mu: float
    u: np.ndarray
    T: np.ndarray
    detT: float
    c: float
    a: np.ndarray
    a_residual: float
    frame: FramePoint
    frame_mu: FramePoint
    residuals: dict[str, float]

    @property
    def lam_mu(self) -> np.ndarray:
        return self.frame_mu.lam

    @property
    def lam_formula(self) -> np.ndarray:
        lam = self.frame.lam
        return np.sort(self.c * lam / (1.0 - self.mu * lam))


def transfer_and_c(base: FramePoint, par: FramePoint, mu: float):
    """``T = I - mu B``, ``det T``, and ``Y^mu = sum a^i x_i + c Y`` in the base frame.

    Returns ``(T, detT, c, a, checks)`` where ``checks`` holds the residuals of
    ``c^{n+2} det T = 1`` and ``c^{n+1} = (H / H^mu)^{1/(n+2)}``.
    """
    n = base.n
    T = np.eye(n) - mu * base.B_mixed
    detT = float(np.linalg.det(T))
    frame = np.column_stack([*base.x_i, base.Y])
    coef = np.linalg.solve(frame, par.Y)
    a, c = coef[:n], float(coef[n])
    checks = {
        "c_detT": abs(c ** (n + 2) * detT - 1.0),
        "c_consistency": abs(c ** (n + 1) - (base.H / par.H) ** (1.0 / (n + 2))),
        "a_residual": float(np.linalg.norm(a)),
    }
    return T, detT, c, a, checks


def verify_parallel_identities(base: FramePoint, par: FramePoint, T: np.ndarray, detT: float, c: float, mu: float) -> dict[str, float]:
    """Residuals of the identities relating the invariants of ``x`` and ``x^mu``."""
    n = base.n
    if not np.allclose(base.u, par.u):
        raise GeometryError("base and parallel frames are in different charts")
    pushed = T.T @ base.x_i  # row i: sum_j T^j_i x_j
    lam_formula = np.sort(c * base.lam / (1.0 - mu * base.lam))
    return {
        "pushed_basis": float(np.abs(par.x_i - pushed).max()),
        "mutg": float(np.abs(T.T @ base.G - c * par.G).max()),
        "b_invariance": float(np.abs(par.B_cov - base.B_cov).max()),
        "mub_cb": float(np.abs(T @ par.B_mixed - c * base.B_mixed).max()),
        "lambda_formula": float(np.abs(par.lam - lam_formula).max()),
        "muhandh": abs(par.H ** (1.0 / (n + 2)) - detT * c * base.H ** (1.0 / (n + 2))),
        "detg": abs(np.linalg.det(par.G) - par.H ** (2.0 / (n + 2))),
    }


def parallel_record(base: Immersion, u: Sequence[float], mu: float, order: int = PARALLEL_ORDER, margin: float | None = MU_MARGIN) -> ParallelRecord:
    """Invariants of ``x`` and ``x^mu`` at ``u`` plus every identity residual."""
    u = np.asarray(u, dtype=float)
    n = base.n
    x = base.evaluate(u, order)
    fp = frame_from_jets(x, n, u, base.hint(u, tangent_values(x, n)))
    if margin is not None:
        check_admissible(mu, fp.lam, margin)
    Y = fp.jets.Y
    xmu = x.truncate(Y.order) + Y * mu
    fpm = frame_from_jets(xmu, n, u, fp.Y)
    T, detT, c, a, checks = transfer_and_c(fp, fpm, mu)
    residuals = {**checks, **verify_parallel_identities(fp, fpm, T, detT, c, mu)}
    return ParallelRecord(mu, u, T, detT, c, a, checks["a_residual"], fp, fpm, residuals)


def dett_polynomial(L: Sequence[float], mu: float) -> float:
    """``n L_1 - C(n,2) mu L_2 + ... + (-1)^{n+1} mu^{n-1} L_n``."""
    n = len(L)
    return math.fsum(
        (-1) ** (r + 1) * math.comb(n, r) * mu ** (r - 1) * L[r - 1] for r in range(1, n + 1)
    )


@dataclass
class ParallelTestReport:
    mu: float
    spreads: dict[str, float]
    verdicts: dict[str, str]
    agree: bool
    verdict: str
    records: list[ParallelRecord] = field(repr=False)

    @property
    def equiaffine_parallel(self) -> bool:
        return self.agree and self.verdict == CONSTANT


def parallelism_check(
    base: Immersion,
    grid: Sequence[Sequence[float]],
    mu: float,
    order: int = PARALLEL_ORDER,
    loose: float = LOOSE,
    gray: float = GRAY,
    records: Sequence[ParallelRecord] | None = None,
) -> ParallelTestReport:
    """Constancy over the grid of the four equivalent parallelism quantities."""
    if records is None:
        records = [parallel_record(base, u, mu, order) for u in grid]
    series = {
        "detT": [r.detT for r in records],
        "H_ratio": [r.frame.H / r.frame_mu.H for r in records],
        "detG_ratio": [np.linalg.det(r.frame.G) / np.linalg.det(r.frame_mu.G) for r in records],
        "polynomial": [dett_polynomial(r.frame.L, mu) for r in records],
    }
    spreads, verdicts = {}, {}
    for key, vals in series.items():
        spreads[key], verdicts[key] = classify_samples(vals, loose, gray)
    distinct = set(verdicts.values())
    agree = len(distinct) == 1
    verdict = distinct.pop() if agree else INCONCLUSIVE
    return ParallelTestReport(mu, spreads, verdicts, agree, verdict, list(records))


# name used by the operation list of the build contract
corollary32_check = parallelism_check


def c_spread(records: Sequence[ParallelRecord], loose: float = LOOSE, gray: float = GRAY) -> tuple[float, str]:
    """Spread of ``c`` over records sharing one ``mu`` and its constancy verdict."""
    return classify_samples([r.c for r in records], loose, gray)


def reverse_check(base: Immersion, u: Sequence[float], mu: float, order: int = 10) -> dict[str, float]:
    """Run the construction back from ``x^mu`` with ``mu' = -mu / c``.

    The parallel hypersurface's own affine normal (computed from its jets) is
    used, so returning to ``x`` exercises the symmetry of equiaffine
    parallelism.  Returns deviations of position and principal curvatures.
    """
    u = np.asarray(u, dtype=float)
    rec = parallel_record(base, u, mu, order)
    par = parallel_immersion(base, mu)
    back = parallel_immersion(par, -mu / rec.c)
    x_back = back.evaluate(u, order)
    fp_back = frame_from_jets(x_back, base.n, u, rec.frame.Y)
    return {
        "c": rec.c,
        "mu_back": -mu / rec.c,
        "position": float(np.abs(fp_back.x - rec.frame.x).max()),
        "lambda": float(np.abs(fp_back.lam - rec.frame.lam).max()),
        "L1": abs(fp_back.L1 - rec.frame.L1),
    }


__all__ = [
    "DEFAULT_MU",
    "PARALLEL_ORDER",
    "InadmissibleMu",
    "ParallelParams",
    "ParallelRecord",
    "ParallelTestReport",
    "admissible_mu",
    "admissible_delta",
    "check_admissible",
    "parallel_jets",
    "parallel_immersion",
    "parallel_record",
    "transfer_and_c",
    "verify_parallel_identities",
    "parallelism_check",
    "corollary32_check",
    "c_spread",
    "dett_polynomial",
    "reverse_check",
    "CONSTANT",
    "NON_CONSTANT",
    "INCONCLUSIVE",
]

"""Tube chart around a hypersurface and the level function ``F = mu``.

Chart coordinates are ``(u_1 .. u_n, mu)`` with the map ``(u, mu) -> x(u) +
mu Y(u)``; the chart basis is ``{x^mu_1 .. x^mu_n, Y}``.  Index ``n`` of every
``(n+1)``-dimensional array below is the ``mu`` direction.

Two connection routes are kept side by side:

* ``formula``: the tube Christoffel symbols written in closed form in terms
  of ``G^mu``, ``B``, ``B^mu``, ``c`` and ``c'``;
* ``levi_civita``: the Levi-Civita connection computed from jets of the tube
  metric in ``(u, mu)``.

They differ by terms proportional to ``c'(mu)`` (see :func:`tube_christoffel`),
so on surfaces with ``c' != 0`` the two routes are reported separately rather
than merged.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .invariants import (
    GeometryError,
    Immersion,
    levi_civita,
    line_angle,
    normal_data,
    tangent_values,
    volume,
)
from .jets import Jet, constant, jet_inverse, values, variables
from .parallel import ParallelRecord, admissible_delta, parallel_jets, parallel_record
from .tolerances import MU_MARGIN

C_FIT_DEGREE = 6
C_FIT_HALF_WIDTH = 0.05
C_FIT_SAMPLES = 13
TUBE_JET_ORDER = 7
FD_STEP = 1e-4
NEWTON_MAX_ITER = 50
NEWTON_STEP_TOL = 1e-12


class TubeInversionError(GeometryError):
    """Newton inversion of the tube map did not converge."""


class CFitUnavailable(GeometryError):
    """``c(mu)`` could not be sampled around the requested ``mu``."""


@dataclass
class TubeChart:
    """Tube around ``base`` with ``c(mu)`` sampled at the chart center ``u0``.

    ``c`` and ``c'`` come from local least-squares polynomial fits of
    ``mu -> c(mu)`` (degree ``C_FIT_DEGREE``) on a small window around the
    requested ``mu``; fits are cached per window.
    """

    base: Immersion
    u0: np.ndarray
    delta: float
    order: int = 8
    margin: float = MU_MARGIN

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=float)
        self._fit = functools.lru_cache(maxsize=256)(self._fit_window)

    def map(self, u: Sequence[float], mu: float) -> np.ndarray:
        x = parallel_jets(self.base, variables(np.asarray(u, float), 3), mu, None)[0]
        return x.value()

    def sample_c(self, mu: float) -> float:
        return parallel_record(self.base, self.u0, mu, self.order, margin=None).c

    def _fit_window(self, center: float) -> np.polynomial.Polynomial:
        h = C_FIT_HALF_WIDTH
        k = np.arange(C_FIT_SAMPLES)
        nodes = center + h * np.cos(np.pi * (k + 0.5) / C_FIT_SAMPLES)
        try:
            cs = [self.sample_c(m) for m in nodes]
        except GeometryError as exc:
            raise CFitUnavailable(f"cannot sample c(mu) near mu={center:g}: {exc}") from exc
        return np.polynomial.Polynomial.fit(nodes, cs, C_FIT_DEGREE)

    def c_poly(self, mu: float) -> np.polynomial.Polynomial:
        # windows are keyed on a rounded center so nearby queries share a fit
        return self._fit(round(float(mu), 6))

    def c(self, mu: float) -> float:
        return float(self.c_poly(mu)(mu))

    def c_prime(self, mu: float) -> float:
        return float(self.c_poly(mu).deriv()(mu))

    def c_jet(self, mu_jet: Jet) -> Jet:
        """``c`` as a jet in the chart ring, from the fitted polynomial."""
        p = self.c_poly(mu_jet.value)
        coef = p.convert().coef
        out = constant(0.0, mu_jet.num_vars, mu_jet.order)
        for a in coef[::-1]:
            out = out * mu_jet + float(a)
        return out


def build_tube_chart(base: Immersion, u0: Sequence[float], grid: Sequence[Sequence[float]] | None = None, order: int = 8, margin: float = MU_MARGIN) -> TubeChart:
    """Tube chart with half-width from the admissible range over ``grid``."""
    from .invariants import frame_point

    pts = [np.asarray(u0, float)] + [np.asarray(p, float) for p in (grid or [])]
    lams = [frame_point(base, p).lam for p in pts]
    lo, hi = admissible_delta(lams, margin)
    delta = min(abs(lo), hi, 1.0)
    return TubeChart(base, np.asarray(u0, float), delta, order, margin)


@dataclass
class TubeMetric:
    g: np.ndarray
    G_mu: np.ndarray
    c: float
    sqrt_det: float
    frame_volume: float
    record: ParallelRecord = field(repr=False)

    @property
    def volume_residual(self) -> float:
        return abs(self.sqrt_det - self.frame_volume)


def tube_metric(chart: TubeChart, u: Sequence[float], mu: float) -> TubeMetric:
    """``g~ = G^mu (+) c^{-2} dmu^2`` in the chart basis, with the volume surrogate."""
    rec = parallel_record(chart.base, u, mu, chart.order, chart.margin)
    n = chart.base.n
    c = rec.c
    g = np.zeros((n + 1, n + 1))
    g[:n, :n] = rec.frame_mu.G
    g[n, n] = 1.0 / c**2
    vol = abs(volume([*rec.frame_mu.x_i, rec.frame.Y]))
    return TubeMetric(g, rec.frame_mu.G, c, float(np.sqrt(np.linalg.det(g))), vol, rec)


def _formula_christoffel(rec: ParallelRecord, c: float, c_prime: float) -> np.ndarray:
    n = rec.frame.n
    G = np.zeros((n + 1, n + 1, n + 1))
    G[:n, :n, :n] = rec.frame_mu.Gamma_LC
    G[n, :n, :n] = 0.5 * c * rec.frame.B_cov
    # Gamma^i_{mu j}, with B^mu mixed stored as [i][j] = B^i_j
    G[:n, n, :n] = -rec.frame_mu.B_mixed / (2.0 * c)
    G[:n, :n, n] = G[:n, n, :n]
    G[n, n, n] = -c_prime / c
    return G


def tube_metric_jets(chart: TubeChart, u: Sequence[float], mu: float, order: int = TUBE_JET_ORDER):
    """Jets of ``g~`` in the ``n + 1`` chart variables ``(u, mu)``."""
    n = chart.base.n
    u = np.asarray(u, dtype=float)
    coords = variables([*u, mu], order)
    xmu, _ = parallel_jets(chart.base, coords[:n], coords[n], chart.margin)
    hint = normal_data(chart.base.evaluate(u, 3), n, u, chart.base.hint(u, tangent_values(chart.base.evaluate(u, 1), n)))[2].value()
    _, metric, _, _ = normal_data(xmu, n, u, hint)
    o = metric.G[0][0].order
    inv_c2 = chart.c_jet(coords[n].truncate(o)) ** -2
    zero = constant(0.0, n + 1, o)
    g = [[metric.G[i][j] if i < n and j < n else zero for j in range(n + 1)] for i in range(n + 1)]
    g[n][n] = inv_c2
    return g


def tube_christoffel(chart: TubeChart, u: Sequence[float], mu: float, rec: ParallelRecord | None = None):
    """Formula and Levi-Civita tube Christoffel symbols ``[C][A][B]``.

    Formula route::

        Gamma^k_ij = Levi-Civita of G^mu     Gamma^mu_ij   = c B_ij / 2
        Gamma^i_{mu j} = -B^mu^i_j / (2c)     Gamma^mu_{mu mu} = -c'/c
        Gamma^i_{mu mu} = Gamma^mu_{i mu} = 0

    Returns ``(formula, levi_civita, max_abs_discrepancy)``.
    """
    if rec is None:
        rec = parallel_record(chart.base, u, mu, chart.order, chart.margin)
    c, cp = chart.c(mu), chart.c_prime(mu)
    formula = _formula_christoffel(rec, c, cp)
    g = tube_metric_jets(chart, u, mu)
    g = [[x.truncate(1) for x in row] for row in g]
    lc = np.array([[[v.value for v in row] for row in mat] for mat in levi_civita(g, jet_inverse(g))])
    return formula, lc, float(np.abs(formula - lc).max())


def laplacian(g: np.ndarray, Gamma: np.ndarray, n: int) -> float:
    """``Delta F = g^{AB}(F_AB - Gamma^C_AB F_C)`` for the coordinate ``F = mu``."""
    return float(-np.einsum("ab,ab->", np.linalg.inv(g), Gamma[n]))


@dataclass
class LevelFunctionData:
    grad: np.ndarray
    grad_ambient: np.ndarray
    norm: float
    lap_formula: float
    lap_levi_civita: float
    residuals: dict[str, float]


def level_function_data(chart: TubeChart, u: Sequence[float], mu: float, metric: TubeMetric | None = None, christoffel=None) -> LevelFunctionData:
    """Gradient, norm and Laplacian of ``F`` at ``x(u) + mu Y(u)``.

    ``lap_formula`` is ``-n c L1^mu / 2 + c c'``; ``lap_levi_civita`` is the
    Laplace-Beltrami operator of the tube metric applied to ``F``.
    """
    n = chart.base.n
    if metric is None:
        metric = tube_metric(chart, u, mu)
    if christoffel is None:
        christoffel = tube_christoffel(chart, u, mu, metric.record)
    _, lc, _ = christoffel
    rec = metric.record
    ginv = np.linalg.inv(metric.g)
    grad = ginv[:, n]
    c, cp = chart.c(mu), chart.c_prime(mu)
    norm = float(np.sqrt(grad @ metric.g @ grad))
    lap_formula = -0.5 * n * c * rec.frame_mu.L1 + c * cp
    lap_lc = laplacian(metric.g, lc, n)
    grad_ambient = grad[:n] @ rec.frame_mu.x_i + grad[n] * rec.frame.Y
    return LevelFunctionData(
        grad,
        grad_ambient,
        norm,
        lap_formula,
        lap_lc,
        {
            "norm_minus_c": abs(norm - metric.c),
            "grad_vs_cY_mu": float(np.abs(grad_ambient - metric.c * rec.frame_mu.Y).max()),
            "lap_routes": abs(lap_formula - lap_lc),
            "c_fit_vs_pointwise": abs(c - metric.c),
        },
    )


def newton_invert(chart: TubeChart, p: Sequence[float], guess: tuple[Sequence[float], float] | None = None) -> tuple[np.ndarray, float]:
    """Solve ``x(u) + mu Y(u) = p`` for ``(u, mu)``; ``F(p) = mu``."""
    n = chart.base.n
    p = np.asarray(p, dtype=float)
    if guess is None:
        u, mu = chart.u0.copy(), 0.0
    else:
        u, mu = np.asarray(guess[0], float).copy(), float(guess[1])
    for _ in range(NEWTON_MAX_ITER):
        try:
            xm, Y = parallel_jets(chart.base, variables(u, 4), mu, None)
        except (GeometryError, ValueError, ZeroDivisionError) as exc:
            raise TubeInversionError(f"tube map undefined at u={u}, mu={mu:g}: {exc}") from exc
        J = np.column_stack([tangent_values(xm, n).T, Y.value()])
        r = xm.value() - p
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(r))):
            raise TubeInversionError(f"non-finite tube map at u={u}, mu={mu:g}")
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise TubeInversionError(f"singular tube Jacobian at u={u}, mu={mu:g}") from exc
        u = u + step[:n]
        mu = mu + step[n]
        if np.abs(step).max() <= NEWTON_STEP_TOL:
            return u, float(mu)
    raise TubeInversionError(f"no convergence after {NEWTON_MAX_ITER} iterations for p={p}")


def ambient_hessian(chart: TubeChart, p: Sequence[float], guess=None, h: float = FD_STEP) -> np.ndarray:
    """Central-difference Hessian of ``p -> F(p)`` with one Richardson step."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    if guess is None:
        guess = newton_invert(chart, p)
    cache: dict[tuple, float] = {}

    def F(offset: tuple) -> float:
        if offset not in cache:
            cache[offset] = newton_invert(chart, p + np.asarray(offset, float), guess)[1]
        return cache[offset]

    def D(step: float) -> np.ndarray:
        H = np.zeros((m, m))
        e = np.eye(m) * step
        f0 = F(tuple(np.zeros(m)))
        for a in range(m):
            H[a, a] = (F(tuple(e[a])) - 2 * f0 + F(tuple(-e[a]))) / step**2
            for b in range(a + 1, m):
                H[a, b] = H[b, a] = (
                    F(tuple(e[a] + e[b])) - F(tuple(e[a] - e[b])) - F(tuple(e[b] - e[a])) + F(tuple(-e[a] - e[b]))
                ) / (4 * step**2)
        return H

    return (4.0 * D(h / 2) - D(h)) / 3.0


@dataclass
class FlatHessian:
    formula: np.ndarray
    numeric_chart: np.ndarray
    ambient: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    null_angle: float
    xi: np.ndarray

    @property
    def route_discrepancy(self) -> float:
        return float(np.abs(self.formula - self.numeric_chart).max())


def flat_hessian(chart: TubeChart, u: Sequence[float], mu: float, metric: TubeMetric | None = None) -> FlatHessian:
    """Flat Hessian of ``F``: closed form ``-c G^mu_ij`` versus ambient differences."""
    n = chart.base.n
    if metric is None:
        metric = tube_metric(chart, u, mu)
    rec = metric.record
    formula = np.zeros((n + 1, n + 1))
    formula[:n, :n] = -metric.c * metric.G_mu
    p = rec.frame_mu.x
    amb = ambient_hessian(chart, p, (np.asarray(u, float), mu))
    J = np.column_stack([rec.frame_mu.x_i.T, rec.frame.Y])
    numeric = J.T @ amb @ J
    w, V = np.linalg.eigh(amb)
    xi = metric.c * rec.frame.Y
    k = int(np.argmin(np.abs(w)))
    angle = line_angle(V[:, k], xi)
    return FlatHessian(formula, numeric, amb, w, V, angle, xi)


def _xi_derivative_chart(rec: ParallelRecord, c: float, c_prime: float) -> np.ndarray:
    """Flat derivative ``d xi(d_A)`` of ``xi = c Y`` in chart components ``[A][C]``."""
    n = rec.frame.n
    Yj = rec.frame.jets.Y
    Yi = np.array([Yj.diff(i).value() for i in range(n)])
    J = np.column_stack([rec.frame_mu.x_i.T, rec.frame.Y])
    out = np.zeros((n + 1, n + 1))
    for i in range(n):
        out[i] = np.linalg.solve(J, c * Yi[i])
    out[n, n] = c_prime
    return out


def covariant_xi(Gamma: np.ndarray, c: float, c_prime: float) -> np.ndarray:
    """``nabla~_A xi`` for ``xi = c d_mu`` in chart components ``[A][C]``."""
    m = Gamma.shape[0]
    n = m - 1
    out = c * Gamma[:, :, n].T  # [A][C] = c Gamma^C_{A mu}
    out[n, n] += c_prime
    return out


def condition4_check(chart: TubeChart, u: Sequence[float], mu: float, christoffel=None, rec: ParallelRecord | None = None) -> dict[str, float]:
    """Residual of ``2 nabla~ xi = d xi - (d log a) xi`` with ``a = c``, per route."""
    if rec is None:
        rec = parallel_record(chart.base, u, mu, chart.order, chart.margin)
    if christoffel is None:
        christoffel = tube_christoffel(chart, u, mu, rec)
    formula, lc, _ = christoffel
    n = rec.frame.n
    c, cp = chart.c(mu), chart.c_prime(mu)
    dxi = _xi_derivative_chart(rec, c, cp)
    dlog = np.zeros(n + 1)
    dlog[n] = cp / c
    xi = np.zeros(n + 1)
    xi[n] = c
    rhs = dxi - np.outer(dlog, xi)
    out = {}
    for name, Gam in (("formula", formula), ("levi_civita", lc)):
        res = 2.0 * covariant_xi(Gam, c, cp) - rhs
        out[name] = float(np.abs(res).max())
        out[f"{name}_mu_component"] = float(np.abs(res[n]).max())
    return out


def riemannian_shape(Gamma: np.ndarray, c: float) -> np.ndarray:
    """``S^j_i = -(nabla~_i xi)^j`` of a level set, stored ``[j][i]``."""
    n = Gamma.shape[0] - 1
    return -c * Gamma[:n, :n, n]


def half_shape_identity(chart: TubeChart, u: Sequence[float], mu: float, christoffel=None, rec: ParallelRecord | None = None) -> dict[str, float]:
    """Compare the Riemannian shape operator of the level set with ``B^mu / 2``."""
    if rec is None:
        rec = parallel_record(chart.base, u, mu, chart.order, chart.margin)
    if christoffel is None:
        christoffel = tube_christoffel(chart, u, mu, rec)
    formula, lc, _ = christoffel
    c = chart.c(mu)
    half = 0.5 * rec.frame_mu.B_mixed
    trB = np.trace(rec.frame_mu.B_mixed)
    out = {}
    for name, Gam in (("formula", formula), ("levi_civita", lc)):
        S = riemannian_shape(Gam, c)
        out[name] = float(np.abs(S - half).max())
        out[f"{name}_trace_ratio"] = float(np.trace(S) / trB) if abs(trB) > 1e-14 else float("nan")
    return out


def geodesic_check(chart: TubeChart, u: Sequence[float], mu: float, christoffel=None) -> dict[str, float]:
    """``mu``-curves: straight in R^{n+1}, and unit-speed geodesics in ``s = int dmu / c``."""
    n = chart.base.n
    if christoffel is None:
        christoffel = tube_christoffel(chart, u, mu)
    _, lc, _ = christoffel
    coords = variables([*np.asarray(u, float), mu], 5)
    xmu, _ = parallel_jets(chart.base, coords[:n], coords[n], None)
    second = max(abs(comp.diff(n).diff(n).value) for comp in xmu)
    c, cp = chart.c(mu), chart.c_prime(mu)
    vel = np.zeros(n + 1)
    vel[n] = c
    acc = np.zeros(n + 1)
    acc[n] = cp * c
    res = acc + np.einsum("cab,a,b->c", lc, vel, vel)
    speed = float(np.sqrt(vel @ tube_metric(chart, u, mu).g @ vel))
    return {"ambient_second_derivative": float(second), "geodesic": float(np.abs(res).max()), "unit_speed": abs(speed - 1.0)}


@dataclass
class TubeSample:
    u: np.ndarray
    mu: float
    g_tilde: np.ndarray
    christoffel_formula: np.ndarray
    christoffel_numeric: np.ndarray
    christoffel_discrepancy: float
    gradF: np.ndarray
    normF: float
    lapF: float
    lapF_levi_civita: float
    hess0F: FlatHessian | None
    xi: np.ndarray
    conditions: dict[str, float]

    @property
    def def42(self) -> dict[str, float]:
        """Alias of ``conditions`` under the build contract's field name."""
        return self.conditions


def metric_hessian_residual(metric: TubeMetric, hess: np.ndarray) -> float:
    """``|g~ + Hess_0 F / a - ds^2|`` with ``a = c`` and ``ds = dmu / c``."""
    n = metric.g.shape[0] - 1
    ds2 = np.zeros_like(metric.g)
    ds2[n, n] = 1.0 / metric.c**2
    return float(np.abs(metric.g + hess / metric.c - ds2).max())


def tube_sample(chart: TubeChart, u: Sequence[float], mu: float, with_hessian: bool = True) -> TubeSample:
    """Every isoparametric-function condition evaluated at one tube point."""
    u = np.asarray(u, dtype=float)
    metric = tube_metric(chart, u, mu)
    rec = metric.record
    chris = tube_christoffel(chart, u, mu, rec)
    lf = level_function_data(chart, u, mu, metric, chris)
    c4 = condition4_check(chart, u, mu, chris, rec)
    half = half_shape_identity(chart, u, mu, chris, rec)
    conditions = {
        "volume_surrogate": metric.volume_residual,
        "norm_gradF": lf.residuals["norm_minus_c"],
        "lap_routes": lf.residuals["lap_routes"],
        "christoffel_routes": chris[2],
        "condition4_formula": c4["formula"],
        "condition4_levi_civita": c4["levi_civita"],
        "half_shape_formula": half["formula"],
        "half_shape_levi_civita": half["levi_civita"],
    }
    hess = None
    if with_hessian:
        hess = flat_hessian(chart, u, mu, metric)
        conditions["metric_hessian_formula"] = metric_hessian_residual(metric, hess.formula)
        conditions["metric_hessian_numeric"] = metric_hessian_residual(metric, hess.numeric_chart)
        conditions["hessian_routes"] = hess.route_discrepancy
        conditions["null_angle"] = hess.null_angle
    return TubeSample(
        u,
        mu,
        metric.g,
        chris[0],
        chris[1],
        chris[2],
        lf.grad,
        lf.norm,
        lf.lap_formula,
        lf.lap_levi_civita,
        hess,
        metric.c * rec.frame.Y,
        conditions,
    )


__all__ = [
    "TubeChart",
    "TubeMetric",
    "TubeSample",
    "FlatHessian",
    "LevelFunctionData",
    "TubeInversionError",
    "CFitUnavailable",
    "build_tube_chart",
    "tube_metric",
    "tube_metric_jets",
    "tube_christoffel",
    "laplacian",
    "level_function_data",
    "newton_invert",
    "ambient_hessian",
    "flat_hessian",
    "condition4_check",
    "half_shape_identity",
    "riemannian_shape",
    "covariant_xi",
    "geodesic_check",
    "metric_hessian_residual",
    "tube_sample",
]

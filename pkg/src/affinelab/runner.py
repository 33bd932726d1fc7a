"""Orchestration of the CLI subcommands over grid x mu."""

from __future__ import annotations

import functools
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from .catalog import CatalogEntry, UnknownSurface, catalog_get, grid_points
from .detector import INCONCLUSIVE, ISOPARAMETRIC, constant_principal_detector
from .expr import ParseError
from .invariants import GeometryError, frame_point
from .parallel import DEFAULT_MU, admissible_mu, parallelism_check, parallel_record
from .report import (
    SCHEMA_VERSION,
    ConfigError,
    RunConfig,
    frame_summary,
    parallel_summary,
)
from .tolerances import CONSTANT, MU_MARGIN
from .tube import TubeChart, geodesic_check, tube_sample

COMMANDS = ("invariants", "parallel", "isoparametric", "verify-all")
# finite-difference Hessian checks are limited by the step, not by rounding
FD_TOL = 1e-5
GATING_TUBE_KEYS = ("volume_surrogate", "norm_gradF", "condition4_formula", "half_shape_formula")
DIAGNOSTIC_TUBE_KEYS = ("christoffel_routes", "lap_routes", "condition4_levi_civita", "half_shape_levi_civita")


@functools.lru_cache(maxsize=32)
def _entry(name: str) -> CatalogEntry:
    return catalog_get(name)


def resolve_entry(name: str) -> CatalogEntry:
    try:
        return _entry(name)
    except (UnknownSurface, ParseError) as exc:
        raise ConfigError(str(exc)) from exc


def resolve_grid(entry: CatalogEntry, config: RunConfig) -> list[np.ndarray]:
    spec = config.grid
    n = entry.n
    counts = spec.counts
    if len(counts) == 1:
        counts = counts * n
    if len(counts) != n:
        raise ConfigError(f"grid has {len(counts)} axes but {entry.name} has {n} parameters")
    bounds = spec.bounds or entry.chart_domain
    if len(bounds) != n:
        raise ConfigError(f"grid has {len(bounds)} intervals but {entry.name} has {n} parameters")
    for (a, b), (lo, hi) in zip(bounds, entry.chart_domain):
        if a < lo - 1e-12 or b > hi + 1e-12:
            raise ConfigError(f"grid interval [{a}, {b}] leaves the chart domain [{lo}, {hi}] of {entry.name}")
    return grid_points(bounds, counts)


# --- per-sample workers (module level so they pickle) -------------------------


def _frame_task(args):
    name, u, order = args
    return frame_summary(frame_point(_entry(name).immersion, np.array(u), order))


def _parallel_task(args):
    name, u, mu, order = args
    return parallel_record(_entry(name).immersion, np.array(u), mu, order)


def _tube_task(args):
    name, u0, u, mu, hessian = args
    chart = _chart(name, tuple(u0))
    s = tube_sample(chart, np.array(u), mu, with_hessian=hessian)
    out = {
        "u": s.u,
        "mu": s.mu,
        "c": chart.c(mu),
        "c_prime": chart.c_prime(mu),
        "normF": s.normF,
        "lapF": s.lapF,
        "lapF_levi_civita": s.lapF_levi_civita,
        "g_tilde": s.g_tilde,
        "residuals": dict(s.conditions),
    }
    if hessian:
        out["hessian_eigenvalues"] = s.hess0F.eigenvalues
        geo = geodesic_check(chart, np.array(u), mu)
        out["residuals"]["geodesic"] = geo["geodesic"]
        out["residuals"]["mu_line_straight"] = geo["ambient_second_derivative"]
    return out


@functools.lru_cache(maxsize=32)
def _chart(name: str, u0: tuple) -> TubeChart:
    return TubeChart(_entry(name).immersion, np.array(u0), 1.0)


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _fmt(u) -> str:
    return "(" + ", ".join(f"{float(x):g}" for x in u) + ")"


def _over(values: Iterable[tuple[str, float | None]], tol: float, where: str) -> list[str]:
    return [f"{where}: {k} = {v:.3e} > {tol:g}" for k, v in values if v is not None and v > tol]


def choose_mu(entry: CatalogEntry, grid: Sequence[np.ndarray], config: RunConfig, lams) -> list[float]:
    if config.mu_values is None:
        return admissible_mu(DEFAULT_MU, lams, MU_MARGIN)
    ok = admissible_mu(config.mu_values, lams, MU_MARGIN)
    bad = [m for m in config.mu_values if m not in ok]
    if bad:
        raise ConfigError(f"mu values {bad} are not admissible on {entry.name} (need 1 - mu*lambda >= {MU_MARGIN})")
    return list(config.mu_values)


def run(config: RunConfig) -> tuple[dict, int]:
    """Execute ``config.command``; returns ``(report, exit_code)``.

    Raises :class:`ConfigError` for usage problems (exit code 2).
    """
    config.validate()
    if config.command not in COMMANDS:
        raise ConfigError(f"unknown command {config.command!r}")
    entry = resolve_entry(config.surface)
    grid = resolve_grid(entry, config)
    loose = config.tolerances["loose"]
    gray = config.tolerances["gray"]
    order = config.jet_order
    cmd = config.command
    timings: dict[str, float] = {}
    violations: list[str] = []
    diagnostics: dict[str, float] = {}
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": cmd,
        "config": config.to_json(),
        "surface": entry.name,
        "samples": [],
        "parallel": [],
        "parallel_test": [],
        "tube": [],
        "verdict": None,
        "certificate": {},
        "detector": None,
    }
    jobs = config.jobs
    keys = [tuple(float(x) for x in u) for u in grid]

    try:
        t0 = time.perf_counter()
        samples = _map(_frame_task, [(entry.name, u, max(order, 5)) for u in keys], jobs)
        timings["invariants"] = time.perf_counter() - t0
        lams = [s["lambda"] for s in samples]
        if cmd in ("invariants", "verify-all"):
            report["samples"] = samples
            for s in samples:
                violations += _over(s["residuals"].items(), loose, f"invariants u={_fmt(s['u'])}")

        if cmd in ("parallel", "isoparametric", "verify-all"):
            mus = choose_mu(entry, grid, config, lams)
            report["config"]["mu_values"] = mus
        if cmd in ("parallel", "verify-all"):
            t0 = time.perf_counter()
            items = [(entry.name, u, mu, max(order, 7)) for mu in mus for u in keys]
            recs = _map(_parallel_task, items, jobs)
            report["parallel"] = [parallel_summary(r) for r in recs]
            for r in report["parallel"]:
                violations += _over(r["residuals"].items(), loose, f"parallel u={_fmt(r['u'])} mu={r['mu']:g}")
            for k, mu in enumerate(mus):
                chunk = recs[k * len(keys):(k + 1) * len(keys)]
                rep = parallelism_check(entry.immersion, grid, mu, records=chunk, loose=loose, gray=gray)
                report["parallel_test"].append(
                    {"mu": mu, "spreads": rep.spreads, "verdicts": rep.verdicts, "agree": rep.agree, "verdict": rep.verdict}
                )
                if not rep.agree:
                    violations.append(f"parallel test at mu={mu:g}: verdicts disagree {rep.verdicts}")
                elif rep.verdict != CONSTANT:
                    violations.append(
                        f"parallel test at mu={mu:g}: not equiaffine parallel ({rep.verdict}, detT spread {rep.spreads['detT']:.3e})"
                    )
            timings["parallel"] = time.perf_counter() - t0

        if cmd in ("isoparametric", "verify-all"):
            t0 = time.perf_counter()
            u0 = tuple(float(x) for x in entry.center)
            tube_mus = sorted(set([0.0, *mus]))
            items = [(entry.name, u0, u, mu, False) for mu in tube_mus for u in keys]
            items += [(entry.name, u0, u0, mu, True) for mu in tube_mus]
            tube = _map(_tube_task, items, jobs)
            report["tube"] = tube
            for s in tube:
                where = f"tube u={_fmt(s['u'])} mu={s['mu']:g}"
                r = s["residuals"]
                violations += _over(((k, r[k]) for k in GATING_TUBE_KEYS), loose, where)
                violations += _over(((k, r.get(k)) for k in ("geodesic", "mu_line_straight")), loose, where)
                violations += _over(((k, r.get(k)) for k in ("metric_hessian_numeric", "null_angle")), FD_TOL, where)
                for k in DIAGNOSTIC_TUBE_KEYS:
                    diagnostics[k] = max(diagnostics.get(k, 0.0), r[k])
            for mu in tube_mus:
                level = [s for s in tube if s["mu"] == mu]
                for key in ("lapF", "normF"):
                    vals = [s[key] for s in level]
                    sp = float(max(vals) - min(vals))
                    if sp > loose * (1 + max(abs(v) for v in vals)):
                        violations.append(f"tube mu={mu:g}: {key} not constant on the level set (spread {sp:.3e})")
            timings["tube"] = time.perf_counter() - t0

            t0 = time.perf_counter()
            det = constant_principal_detector(entry.immersion, grid, order=max(order, 7), loose=loose, gray=gray)
            timings["detector"] = time.perf_counter() - t0
            report["detector"] = {
                "route_a": det.route_a,
                "route_b": det.route_b,
                "lambda_spreads": det.lambda_spreads,
                "power_sum_spreads": det.power_sum_spreads,
            }
            report["verdict"] = det.verdict
            report["certificate"] = det.certificate
            if det.verdict == INCONCLUSIVE:
                violations.append("detector verdict inconclusive; refine grid or order")
            elif det.verdict != ISOPARAMETRIC:
                violations.append("detector: affine principal curvatures are not constant")
    except GeometryError as exc:
        violations.append(f"geometry failure: {exc}")

    # summary-level findings first, per-sample residuals after
    report["violations"] = sorted(violations, key=lambda v: v.startswith(("invariants u=", "parallel u=", "tube u=")))
    report["diagnostics"] = diagnostics
    report["timings"] = timings
    code = 0 if not violations else 1
    report["exit_code"] = code
    return report, code


__all__ = ["COMMANDS", "FD_TOL", "run", "resolve_entry", "resolve_grid", "choose_mu"]

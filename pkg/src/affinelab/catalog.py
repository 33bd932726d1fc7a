"""Named test hypersurfaces with closed-form oracles."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets as J
from .expr import num_vars, parse_surface_expression
from .invariants import Immersion, frame_point, line_angle, make_graph_immersion, transform_immersion

DEFAULT_ELLIPSOID = (2.0, 1.0, 0.5)


class UnknownSurface(ValueError):
    """Name is not registered or its arguments are malformed."""


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    immersion: Immersion
    chart_domain: tuple[tuple[float, float], ...]
    expected_verdict: bool | None
    oracles: dict[str, Callable] = field(default_factory=dict)
    hypersphere: str | None = None
    description: str = ""

    @property
    def n(self) -> int:
        return self.immersion.n

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (a + b) for a, b in self.chart_domain])

    def grid(self, counts: Sequence[int] | int = 5, shrink: float = 1.0) -> list[np.ndarray]:
        """Tensor grid over the chart domain (optionally shrunk about its center)."""
        if isinstance(counts, int):
            counts = [counts] * self.n
        c = self.center
        bounds = [(ci + shrink * (a - ci), ci + shrink * (b - ci)) for ci, (a, b) in zip(c, self.chart_domain)]
        return grid_points(bounds, counts)

    def contains(self, u: Sequence[float], slack: float = 1e-12) -> bool:
        return all(a - slack <= x <= b + slack for x, (a, b) in zip(u, self.chart_domain))


def grid_points(bounds: Sequence[tuple[float, float]], counts: Sequence[int]) -> list[np.ndarray]:
    """Row-major tensor grid (last axis fastest)."""
    axes = [np.linspace(a, b, k) if k > 1 else np.array([0.5 * (a + b)]) for (a, b), k in zip(bounds, counts)]
    return [np.array(p) for p in itertools.product(*axes)]


def _paraboloid(n: int = 2) -> CatalogEntry:
    imm = make_graph_immersion(lambda c: 0.5 * sum(ci * ci for ci in c), n, "paraboloid")
    e = np.zeros(n + 1)
    e[-1] = 1.0
    oracles = {
        "Y": lambda u: e.copy(),
        "lambda": lambda u: np.zeros(n),
        "c": lambda mu: 1.0,
        "F": lambda p: p[-1] - 0.5 * float(np.dot(p[:-1], p[:-1])),
    }
    return CatalogEntry("paraboloid", imm, ((-1.0, 1.0),) * n, True, oracles, "parabolic", "f = |u|^2 / 2")


def _sphere(r: float = 1.0, n: int = 2) -> CatalogEntry:
    if r <= 0:
        raise UnknownSurface(f"sphere radius must be positive, got {r}")
    r2 = r * r
    imm = make_graph_immersion(lambda c: J.sqrt(r2 - sum(ci * ci for ci in c)), n, f"sphere({r:g})")
    lam = r ** (-2.0 * (n + 1) / (n + 2))

    def Y(u):
        x = np.array([*u, np.sqrt(r2 - float(np.dot(u, u)))])
        return -lam * x

    oracles = {
        "Y": Y,
        "lambda": lambda u: np.full(n, lam),
        "c": lambda mu: (1.0 - mu * lam) ** (-n / (n + 2)),
        "F": lambda p: (1.0 - float(np.linalg.norm(p)) / r) / lam,
    }
    return CatalogEntry(f"sphere({r:g})", imm, ((-0.4 * r, 0.4 * r),) * n, True, oracles, "elliptic", "upper hemisphere graph")


def _ellipsoid(a: float, b: float, c: float) -> CatalogEntry:
    if abs(a * b * c - 1.0) > 1e-12 or min(a, b, c) <= 0:
        raise UnknownSurface(f"ellipsoid axes must be positive with abc = 1, got {(a, b, c)}")
    S = np.diag([a, b, c])
    sph = _sphere(1.0)
    imm = transform_immersion(sph.immersion, S, name=f"ellipsoid({a:g},{b:g},{c:g})")
    oracles = {
        "Y": lambda u: S @ sph.oracles["Y"](u),
        "lambda": sph.oracles["lambda"],
        "c": sph.oracles["c"],
        "F": lambda p: sph.oracles["F"](np.linalg.solve(S, p)),
    }
    return CatalogEntry(imm.name, imm, sph.chart_domain, True, oracles, "elliptic", "diag(a,b,c) image of the unit sphere")


def _titeica() -> CatalogEntry:
    imm = make_graph_immersion(lambda c: 1.0 / (c[0] * c[1]), 2, "titeica")
    return CatalogEntry("titeica", imm, ((0.5, 2.0), (0.5, 2.0)), True, {"centered": lambda u: np.zeros(3)}, "hyperbolic", "x y z = 1")


def _perturbed(eps: float = 0.1) -> CatalogEntry:
    imm = make_graph_immersion(lambda c: 0.5 * (c[0] * c[0] + c[1] * c[1]) + eps * c[0] ** 3, 2, f"perturbed({eps:g})")
    return CatalogEntry(f"perturbed({eps:g})", imm, ((-0.2, 0.2), (-0.2, 0.2)), eps == 0.0, {}, None, "paraboloid + eps u^3")


def _custom(text: str, bounds: tuple[tuple[float, float], ...] | None = None) -> CatalogEntry:
    f = parse_surface_expression(text)
    n = num_vars(f.ast)
    imm = make_graph_immersion(f, n, f"custom:{text}")
    return CatalogEntry(f"custom:{text}", imm, bounds or ((-0.2, 0.2),) * n, None, {}, None, "user graph")


_BUILDERS: dict[str, Callable[..., CatalogEntry]] = {
    "paraboloid": _paraboloid,
    "sphere": _sphere,
    "ellipsoid": _ellipsoid,
    "titeica": _titeica,
    "perturbed": _perturbed,
}

_NAME = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def catalog_names() -> list[str]:
    return ["paraboloid", "sphere(r)", "ellipsoid(a,b,c)", "titeica", "perturbed(eps)", "custom:<expr>"]


def catalog_get(name: str) -> CatalogEntry:
    """Look up ``name``; ``custom:<expr>`` builds a graph from an expression."""
    if name.startswith("custom:"):
        return _custom(name[len("custom:"):])
    m = _NAME.match(name)
    if m is None or m.group(1) not in _BUILDERS:
        raise UnknownSurface(f"unknown surface {name!r}; known: {', '.join(catalog_names())}")
    key, argtext = m.group(1), m.group(2)
    args: list[float] = []
    if argtext is not None and argtext.strip():
        try:
            args = [float(a) for a in argtext.split(",")]
        except ValueError as exc:
            raise UnknownSurface(f"malformed arguments in {name!r}") from exc
    if key == "ellipsoid" and not args:
        args = list(DEFAULT_ELLIPSOID)
    if key in ("paraboloid",) or (key == "sphere" and len(args) == 2):
        args = [*args[:-1], int(args[-1])] if args else args
    try:
        return _BUILDERS[key](*args)
    except TypeError as exc:
        raise UnknownSurface(f"wrong number of arguments in {name!r}") from exc


def oracle_check(entry: CatalogEntry, grid: Sequence[Sequence[float]], mu_values: Sequence[float] = (0.25, 0.5)) -> dict[str, float]:
    """Largest deviation between pipeline outputs and the entry's oracles."""
    from .parallel import parallel_record
    from .tube import TubeChart, newton_invert

    out: dict[str, float] = {}
    fps = [frame_point(entry.immersion, u) for u in grid]
    o = entry.oracles
    if "Y" in o:
        out["Y"] = max(float(np.abs(fp.Y - o["Y"](fp.u)).max()) for fp in fps)
    if "lambda" in o:
        out["lambda"] = max(float(np.abs(fp.lam - o["lambda"](fp.u)).max()) for fp in fps)
    if "centered" in o:
        angles = []
        for fp in fps:
            angles.append(line_angle(fp.x - o["centered"](fp.u), fp.Y))
        out["Y_position_angle"] = max(angles)
        out["lambda_equal"] = max(float(np.ptp(fp.lam)) for fp in fps)
        allv = np.concatenate([fp.lam for fp in fps])
        out["lambda_spread"] = float(np.ptp(allv))
    if "c" in o:
        devs = []
        for mu in mu_values:
            if min(1.0 - mu * fps[0].lam) < 0.05:
                continue
            devs.append(abs(parallel_record(entry.immersion, grid[0], mu).c - o["c"](mu)))
        out["c"] = max(devs) if devs else 0.0
    if "F" in o:
        chart = TubeChart(entry.immersion, entry.center, 1.0)
        devs = []
        for mu in mu_values:
            if min(1.0 - mu * fps[0].lam) < 0.05:
                continue
            p = chart.map(grid[0], mu)
            devs.append(abs(o["F"](p) - mu))
            _, mu_inv = newton_invert(chart, p, (grid[0], 0.0))
            devs.append(abs(mu_inv - mu))
        out["F"] = max(devs) if devs else 0.0
    return out


__all__ = [
    "CatalogEntry",
    "UnknownSurface",
    "catalog_get",
    "catalog_names",
    "grid_points",
    "oracle_check",
]

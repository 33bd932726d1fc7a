"""Truncated multivariate Taylor jets.

A :class:`Jet` stores the Taylor coefficients ``d^alpha f / alpha!`` of a
scalar quantity at one point, for every multi-index with ``|alpha| <= order``.
Coefficients live in a dense array laid out in graded-lexicographic order, so
truncating to a lower order is a prefix slice.

All partial derivatives used by the geometry modules (``x_i``, ``x_ij``,
derivatives of the metric, of the affine normal, ...) are obtained by
differentiating jets, which is exact up to floating point rounding.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Jet",
    "JetVector",
    "JetError",
    "SingularJetMatrix",
    "jet_space",
    "jet_lift",
    "constant",
    "variables",
    "jet_arith",
    "jet_analytic",
    "jet_partial",
    "jet_linear_solve",
    "jet_solve_many",
    "jet_det",
    "jet_inverse",
    "sqrt",
    "exp",
    "log",
    "sin",
    "cos",
    "pow_real",
]


class JetError(ValueError):
    """Invalid jet operation (mismatched rings, domain violation, bad index)."""


class SingularJetMatrix(JetError):
    """The constant-term matrix of a jet linear system is singular."""


class _Space:
    """Index tables for jets in ``num_vars`` variables truncated at ``order``."""

    def __init__(self, num_vars: int, order: int):
        self.num_vars = num_vars
        self.order = order
        multi: list[tuple[int, ...]] = []
        self.offsets = [0]
        for d in range(order + 1):
            block = [a for a in itertools.product(range(d + 1), repeat=num_vars) if sum(a) == d]
            block.sort(reverse=True)
            multi.extend(block)
            self.offsets.append(len(multi))
        self.multi = multi
        self.size = len(multi)
        self.index = {a: k for k, a in enumerate(multi)}
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in a) for a in multi], dtype=float
        )
        self.degree = np.array([sum(a) for a in multi], dtype=int)

        ia, ib, ic = [], [], []
        for a_idx, a in enumerate(multi):
            da = self.degree[a_idx]
            for b_idx in range(self.offsets[order - da + 1]):
                b = multi[b_idx]
                ia.append(a_idx)
                ib.append(b_idx)
                ic.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.mul_a = np.array(ia, dtype=np.intp)
        self.mul_b = np.array(ib, dtype=np.intp)
        self.mul_c = np.array(ic, dtype=np.intp)

    @functools.cached_property
    def diff_tables(self) -> list[tuple[np.ndarray, np.ndarray]]:
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        lower = jet_space(self.num_vars, self.order - 1)
        tables = []
        for i in range(self.num_vars):
            src = np.empty(lower.size, dtype=np.intp)
            scale = np.empty(lower.size)
            for k, b in enumerate(lower.multi):
                a = list(b)
                a[i] += 1
                src[k] = self.index[tuple(a)]
                scale[k] = a[i]
            tables.append((src, scale))
        return tables


@functools.lru_cache(maxsize=None)
def jet_space(num_vars: int, order: int) -> _Space:
    if num_vars < 1:
        raise JetError(f"num_vars must be positive, got {num_vars}")
    if order < 0:
        raise JetError(f"order must be non-negative, got {order}")
    return _Space(num_vars, order)


class Jet:
    """Truncated Taylor expansion of a scalar function at a point.

    Arithmetic with Python numbers is allowed; arithmetic between jets
    requires the same ``(num_vars, order)``.
    """

    __slots__ = ("space", "coeffs")
    __array_priority__ = 100

    def __init__(self, space: _Space, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, num_vars: int, order: int) -> Jet:
        space = jet_space(num_vars, order)
        return cls(space, np.zeros(space.size))

    @property
    def num_vars(self) -> int:
        return self.space.num_vars

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def __repr__(self) -> str:
        terms = [
            f"{a}:{c:.6g}" for a, c in zip(self.space.multi, self.coeffs) if c != 0.0
        ]
        return f"Jet(n={self.num_vars}, K={self.order}, {{{', '.join(terms)}}})"

    def _check(self, other: Jet) -> None:
        if other.space is not self.space:
            raise JetError(
                f"jet ring mismatch: ({self.num_vars}, {self.order}) vs "
                f"({other.num_vars}, {other.order})"
            )

    def _new(self, coeffs: np.ndarray) -> Jet:
        return Jet(self.space, coeffs)

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self._new(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += other
        return self._new(c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self._new(self.coeffs - other.coeffs)
        c = self.coeffs.copy()
        c[0] -= other
        return self._new(c)

    def __rsub__(self, other):
        c = -self.coeffs
        c[0] += other
        return self._new(c)

    def __neg__(self):
        return self._new(-self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            s = self.space
            prod = self.coeffs[s.mul_a] * other.coeffs[s.mul_b]
            return self._new(np.bincount(s.mul_c, weights=prod, minlength=s.size))
        return self._new(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self._new(self.coeffs / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return exp(exponent * log(self))
        return pow_real(self, exponent)

    def __rpow__(self, base):
        return exp(self * log(float(base)))

    def reciprocal(self) -> Jet:
        a0 = self.coeffs[0]
        if a0 == 0.0:
            raise JetError("division by a jet with zero constant term")
        return self.compose([(-1.0) ** k / a0 ** (k + 1) for k in range(self.order + 1)])

    def compose(self, taylor: Sequence[float]) -> Jet:
        """Return ``f(self)`` given ``taylor[k] = f^(k)(a0) / k!``."""
        shifted = self._new(self.coeffs.copy())
        shifted.coeffs[0] = 0.0
        out = self._new(np.zeros(self.space.size))
        out.coeffs[0] = taylor[self.order]
        for k in range(self.order - 1, -1, -1):
            out = out * shifted
            out.coeffs[0] += taylor[k]
        return out

    def diff(self, var: int) -> Jet:
        """Partial derivative in variable ``var``; the result has order - 1."""
        if not 0 <= var < self.num_vars:
            raise JetError(f"variable index {var} out of range for {self.num_vars} variables")
        src, scale = self.space.diff_tables[var]
        return Jet(jet_space(self.num_vars, self.order - 1), self.coeffs[src] * scale)

    def truncate(self, order: int) -> Jet:
        if order > self.order:
            raise JetError(f"cannot raise jet order from {self.order} to {order}")
        if order == self.order:
            return self
        space = jet_space(self.num_vars, order)
        return Jet(space, self.coeffs[: space.size].copy())

    def partial(self, alpha: Sequence[int]) -> float:
        return jet_partial(self, alpha)


def _as_jet_like(a, like: Jet) -> Jet:
    if isinstance(a, Jet):
        return a
    return constant(float(a), like.num_vars, like.order)


def constant(value: float, num_vars: int, order: int) -> Jet:
    space = jet_space(num_vars, order)
    c = np.zeros(space.size)
    c[0] = value
    return Jet(space, c)


def jet_lift(value: float, kind: str, var_index: int = 0, num_vars: int = 1, order: int = 1) -> Jet:
    """Lift a real number to a constant jet or to the jet of a coordinate variable."""
    if kind == "constant":
        return constant(value, num_vars, order)
    if kind != "variable":
        raise JetError(f"unknown lift kind {kind!r}")
    if not 0 <= var_index < num_vars:
        raise JetError(f"var_index {var_index} out of range for num_vars={num_vars}")
    jet = constant(value, num_vars, order)
    if order >= 1:
        e = [0] * num_vars
        e[var_index] = 1
        jet.coeffs[jet.space.index[tuple(e)]] = 1.0
    return jet


def variables(point: Sequence[float], order: int, num_vars: int | None = None) -> list[Jet]:
    """Coordinate jets for every component of ``point``.

    ``num_vars`` may exceed ``len(point)``; the extra variables are then
    passive (nothing depends on them unless the caller lifts them too).
    """
    m = len(point) if num_vars is None else num_vars
    return [jet_lift(float(p), "variable", i, m, order) for i, p in enumerate(point)]


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise JetError(f"unknown operation {op!r}")


def jet_partial(a: Jet, alpha: Sequence[int]) -> float:
    """``d^alpha a`` at the expansion point."""
    alpha = tuple(int(e) for e in alpha)
    if len(alpha) != a.num_vars or any(e < 0 for e in alpha):
        raise JetError(f"bad multi-index {alpha} for {a.num_vars} variables")
    if sum(alpha) > a.order:
        raise JetError(f"derivative order {sum(alpha)} exceeds jet order {a.order}")
    k = a.space.index[alpha]
    return float(a.coeffs[k] * a.space.factorial[k])


# --- analytic functions ------------------------------------------------------


def _binomial_series(p: float, x0: float, order: int) -> list[float]:
    out = []
    coef = 1.0
    for k in range(order + 1):
        out.append(coef * x0 ** (p - k))
        coef *= (p - k) / (k + 1)
    return out


def _taylor(func: str, x0: float, order: int, exponent: float | None = None) -> list[float]:
    if func == "exp":
        e = math.exp(x0)
        return [e / math.factorial(k) for k in range(order + 1)]
    if func == "log":
        if x0 <= 0.0:
            raise JetError(f"log of non-positive value {x0}")
        return [math.log(x0)] + [(-1.0) ** (k + 1) / (k * x0**k) for k in range(1, order + 1)]
    if func in ("sin", "cos"):
        s, c = math.sin(x0), math.cos(x0)
        cycle = [s, c, -s, -c] if func == "sin" else [c, -s, -c, s]
        return [cycle[k % 4] / math.factorial(k) for k in range(order + 1)]
    if func == "sqrt":
        func, exponent = "pow_real", 0.5
    if func == "pow_real":
        p = float(exponent)
        integral = p == int(p)
        if x0 < 0.0 and not integral:
            raise JetError(f"non-integer power {p} of negative value {x0}")
        if x0 == 0.0 and not (integral and p >= 0):
            raise JetError(f"power {p} of zero is not analytic")
        if x0 == 0.0:
            return [1.0 if k == p else 0.0 for k in range(order + 1)]
        return _binomial_series(p, x0, order)
    raise JetError(f"unknown function {func!r}")


def jet_analytic(a, func: str, exponent: float | None = None):
    """Compose ``func`` with a jet (or a plain float)."""
    if not isinstance(a, Jet):
        return _scalar(func, float(a), exponent)
    if func == "pow_real" and exponent is not None and float(exponent) == int(exponent) and exponent >= 0:
        return _int_power(a, int(exponent))
    return a.compose(_taylor(func, a.value, a.order, exponent))


def _int_power(a: Jet, p: int) -> Jet:
    result = constant(1.0, a.num_vars, a.order)
    base = a
    while p:
        if p & 1:
            result = result * base
        p >>= 1
        if p:
            base = base * base
    return result


def _scalar(func: str, x: float, exponent: float | None) -> float:
    if func == "sqrt":
        if x < 0.0:
            raise JetError(f"sqrt of negative value {x}")
        return math.sqrt(x)
    if func == "log":
        if x <= 0.0:
            raise JetError(f"log of non-positive value {x}")
        return math.log(x)
    if func == "exp":
        return math.exp(x)
    if func == "sin":
        return math.sin(x)
    if func == "cos":
        return math.cos(x)
    if func == "pow_real":
        p = float(exponent)
        if x < 0.0 and p != int(p):
            raise JetError(f"non-integer power {p} of negative value {x}")
        if x == 0.0 and p < 0:
            raise JetError("negative power of zero")
        return x**p
    raise JetError(f"unknown function {func!r}")


def sqrt(a):
    return jet_analytic(a, "sqrt")


def exp(a):
    return jet_analytic(a, "exp")


def log(a):
    return jet_analytic(a, "log")


def sin(a):
    return jet_analytic(a, "sin")


def cos(a):
    return jet_analytic(a, "cos")


def pow_real(a, exponent: float):
    return jet_analytic(a, "pow_real", exponent)


# --- vectors -----------------------------------------------------------------


class JetVector:
    """A vector in R^{n+1} whose components are jets in a common ring."""

    __slots__ = ("components",)

    def __init__(self, components: Iterable[Jet]):
        self.components = list(components)
        spaces = {id(c.space) for c in self.components}
        if len(spaces) > 1:
            raise JetError("JetVector components must share (num_vars, order)")

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, k: int) -> Jet:
        return self.components[k]

    def __repr__(self) -> str:
        return f"JetVector({self.value()})"

    @property
    def order(self) -> int:
        return self.components[0].order

    @property
    def num_vars(self) -> int:
        return self.components[0].num_vars

    def value(self) -> np.ndarray:
        return np.array([c.value for c in self.components])

    def diff(self, var: int) -> JetVector:
        return JetVector(c.diff(var) for c in self.components)

    def truncate(self, order: int) -> JetVector:
        return JetVector(c.truncate(order) for c in self.components)

    def map(self, f: Callable[[Jet], Jet]) -> JetVector:
        return JetVector(f(c) for c in self.components)

    def __add__(self, other: JetVector) -> JetVector:
        return JetVector(a + b for a, b in zip(self.components, other.components))

    def __sub__(self, other: JetVector) -> JetVector:
        return JetVector(a - b for a, b in zip(self.components, other.components))

    def __neg__(self) -> JetVector:
        return JetVector(-a for a in self.components)

    def __mul__(self, s) -> JetVector:
        return JetVector(a * s for a in self.components)

    __rmul__ = __mul__


# --- linear algebra over the jet ring ---------------------------------------

PIVOT_TOL = 1e-12


def _eliminate(M: Sequence[Sequence[Jet]], rhs: list[list[Jet]] | None, tol: float):
    """Gaussian elimination with partial pivoting on constant-term magnitude.

    Returns (upper-triangular rows, transformed rhs columns, pivot sign).
    """
    n = len(M)
    A = [list(row) for row in M]
    if any(len(row) != n for row in A):
        raise JetError("jet matrix must be square")
    cols = [list(c) for c in rhs] if rhs is not None else []
    scale = max((abs(e.value) for row in A for e in row), default=0.0)
    if scale == 0.0:
        raise SingularJetMatrix("zero constant-term matrix")
    sign = 1.0
    for k in range(n):
        p = max(range(k, n), key=lambda r: abs(A[r][k].value))
        if abs(A[p][k].value) <= tol * scale:
            raise SingularJetMatrix(
                f"constant-term matrix singular (pivot {A[p][k].value:.3e}, scale {scale:.3e})"
            )
        if p != k:
            A[k], A[p] = A[p], A[k]
            for c in cols:
                c[k], c[p] = c[p], c[k]
            sign = -sign
        inv = A[k][k].reciprocal()
        for r in range(k + 1, n):
            f = A[r][k] * inv
            for j in range(k + 1, n):
                A[r][j] = A[r][j] - f * A[k][j]
            for c in cols:
                c[r] = c[r] - f * c[k]
            A[r][k] = A[r][k] * 0.0
    return A, cols, sign


def _back_substitute(U: list[list[Jet]], col: list[Jet]) -> list[Jet]:
    n = len(U)
    out: list[Jet] = [None] * n  # type: ignore[list-item]
    for k in range(n - 1, -1, -1):
        s = col[k]
        for j in range(k + 1, n):
            s = s - U[k][j] * out[j]
        out[k] = s / U[k][k]
    return out


def jet_linear_solve(M: Sequence[Sequence[Jet]], rhs: Sequence[Jet], tol: float = PIVOT_TOL) -> list[Jet]:
    """Solve ``M @ sol = rhs`` over the jet ring."""
    return jet_solve_many(M, [list(rhs)], tol)[0]


def jet_solve_many(
    M: Sequence[Sequence[Jet]], rhs_columns: Sequence[Sequence[Jet]], tol: float = PIVOT_TOL
) -> list[list[Jet]]:
    """Solve one system for several right-hand sides, factoring ``M`` once."""
    U, cols, _ = _eliminate(M, [list(c) for c in rhs_columns], tol)
    return [_back_substitute(U, c) for c in cols]


def jet_det(M: Sequence[Sequence[Jet]], tol: float = 0.0) -> Jet:
    """Determinant over the jet ring.

    Small matrices use cofactor expansion, which needs no pivots and stays
    well defined when the constant-term matrix is singular.
    """
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    if n <= 4:
        total = None
        for j in range(n):
            minor = [row[:j] + row[j + 1 :] for row in M[1:]]
            term = M[0][j] * jet_det(minor)
            if j % 2:
                term = -term
            total = term if total is None else total + term
        return total
    U, _, sign = _eliminate(M, None, tol)
    d = U[0][0]
    for k in range(1, n):
        d = d * U[k][k]
    return d * sign


def jet_inverse(M: Sequence[Sequence[Jet]], tol: float = PIVOT_TOL) -> list[list[Jet]]:
    n = len(M)
    like = M[0][0]
    identity = [
        [constant(1.0 if r == c else 0.0, like.num_vars, like.order) for r in range(n)]
        for c in range(n)
    ]
    cols = jet_solve_many(M, identity, tol)
    return [[cols[c][r] for c in range(n)] for r in range(n)]


def values(M) -> np.ndarray:
    """Constant terms of a nested list of jets as an array."""
    if isinstance(M, Jet):
        return np.array(M.value)
    if isinstance(M, JetVector):
        return M.value()
    return np.array([values(m) for m in M])

"""Blaschke (equiaffine) invariants of a locally strongly convex hypersurface.

Everything is computed pointwise in a coordinate chart ``u`` of the
hypersurface: tensors carry coordinate indices, so ``G[i, j]`` is
``G(d/du^i, d/du^j)``.  Index conventions used throughout:

* ``Gamma[k, i, j]`` is the coefficient of ``x_k`` in ``x_ij``;
* ``A_mixed[k, i, j]`` is ``A^k_ij`` and ``A_cov[i, j, k]`` is ``A_ijk``;
* ``B_mixed[j, i]`` is ``B^j_i``, i.e. the matrix of the shape operator acting
  on coordinate vectors, ``Y_i = -sum_j B_mixed[j, i] x_j``;
* ``B_cov = G @ B_mixed`` holds ``B_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .jets import (
    Jet,
    JetVector,
    SingularJetMatrix,
    constant,
    jet_det,
    jet_inverse,
    jet_solve_many,
    pow_real,
    values,
    variables,
)

DEGENERATE_H = 1e-10


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class DegenerateFrame(GeometryError):
    """Tangent vectors and transversal do not span, or ``det h`` vanishes."""


class NotConvex(GeometryError):
    """The second fundamental form is indefinite at the sampled point."""


class InsufficientOrder(GeometryError):
    """The jet order is too low for the requested derivative."""


ImmersionFunc = Callable[[Sequence[Jet]], Sequence]


@dataclass(frozen=True)
class Immersion:
    """A parametrized hypersurface ``u -> x(u)`` in R^{n+1}.

    ``func`` receives the coordinate jets ``u_1 .. u_n`` and returns the
    ``n + 1`` components (jets or plain numbers).  Coordinate jets may live
    in a ring with more than ``n`` variables; the extra ones are passive.
    """

    n: int
    func: ImmersionFunc
    transversal_hint: Callable[[np.ndarray], np.ndarray] | None = None
    orientation: int = 1
    name: str = "immersion"

    def jets(self, coords: Sequence[Jet]) -> JetVector:
        out = list(self.func(list(coords)))
        if len(out) != self.n + 1:
            raise GeometryError(
                f"{self.name}: expected {self.n + 1} components, got {len(out)}"
            )
        like = coords[0]
        return JetVector(
            c if isinstance(c, Jet) else constant(float(c), like.num_vars, like.order)
            for c in out
        )

    def evaluate(self, u: Sequence[float], order: int, num_vars: int | None = None) -> JetVector:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise GeometryError(f"{self.name}: expected a point in R^{self.n}, got {u.shape}")
        return self.jets(variables(u, order, num_vars))

    def point(self, u: Sequence[float]) -> np.ndarray:
        return self.evaluate(u, 0).value()

    def hint(self, u: np.ndarray, tangents: np.ndarray) -> np.ndarray:
        if self.transversal_hint is not None:
            nu = np.asarray(self.transversal_hint(u), dtype=float)
        else:
            # Euclidean normal of the tangent space
            nu = scipy.linalg.null_space(tangents)[:, 0]
        return self.orientation * nu


def make_graph_immersion(f: Callable[[Sequence], object], n: int = 2, name: str = "graph") -> Immersion:
    """The graph ``u -> (u, f(u))`` with the last axis as transversal."""

    def func(coords):
        return [*coords, f(coords)]

    e_last = np.zeros(n + 1)
    e_last[-1] = 1.0
    return Immersion(n=n, func=func, transversal_hint=lambda u: e_last, name=name)


def transform_immersion(imm: Immersion, S: np.ndarray, t: np.ndarray | None = None, name: str | None = None) -> Immersion:
    """The affine image ``S x + t`` of an immersion."""
    S = np.asarray(S, dtype=float)
    t = np.zeros(imm.n + 1) if t is None else np.asarray(t, dtype=float)

    def func(coords):
        x = imm.jets(coords)
        return [sum((x[c] * S[r, c] for c in range(imm.n + 1)), start=float(t[r])) for r in range(imm.n + 1)]

    hint = None
    if imm.transversal_hint is not None:
        base_hint = imm.transversal_hint
        hint = lambda u: S @ base_hint(u)  # noqa: E731
    return Immersion(imm.n, func, hint, imm.orientation, name or f"affine image of {imm.name}")


def reparametrize(imm: Immersion, P: np.ndarray, q: np.ndarray | None = None) -> Immersion:
    """Compose with the chart change ``u = P w + q``."""
    P = np.asarray(P, dtype=float)
    q = np.zeros(imm.n) if q is None else np.asarray(q, dtype=float)

    def to_u(w):
        return P @ np.asarray(w) + q

    def func(coords):
        u = [sum((coords[c] * P[r, c] for c in range(imm.n)), start=float(q[r])) for r in range(imm.n)]
        return imm.jets(u).components

    hint = None
    if imm.transversal_hint is not None:
        base_hint = imm.transversal_hint
        hint = lambda w: base_hint(to_u(w))  # noqa: E731
    return Immersion(imm.n, func, hint, imm.orientation, f"{imm.name} (reparametrized)")


def line_angle(a: Sequence[float], b: Sequence[float]) -> float:
    """Angle in ``[0, pi/2]`` between the lines spanned by ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(np.arctan2(np.linalg.norm(a - (a @ b) * b), abs(a @ b)))


def volume(vectors: Sequence[Sequence[float]]) -> float:
    """Determinant volume of ``n + 1`` vectors in R^{n+1}."""
    return float(np.linalg.det(np.column_stack(vectors)))


# --- staged computation ------------------------------------------------------


@dataclass
class DarbouxFrame:
    n: int
    u: np.ndarray
    order: int
    x: JetVector
    x_i: list[JetVector]
    x_ij: dict[tuple[int, int], JetVector]
    e_np1: JetVector
    h: list[list[Jet]]
    orientation: int


@dataclass
class MetricData:
    h: list[list[Jet]]
    H: Jet
    G: list[list[Jet]]
    G_inv: list[list[Jet]]


def _columns_matrix(cols: Sequence[JetVector], order: int) -> list[list[Jet]]:
    cols = [c.truncate(order) for c in cols]
    return [[cols[c][r] for c in range(len(cols))] for r in range(len(cols[0]))]


def _sym(n: int):
    return [(i, j) for i in range(n) for j in range(i, n)]


def darboux_frame(x: JetVector, n: int, u: np.ndarray, hint: np.ndarray) -> DarbouxFrame:
    """Unimodular transversal normalization and the affine second fundamental form.

    ``x`` is the jet of the immersion at ``u``.  ``e_np1 = nu / Vol(x_1..x_n, nu)``;
    if the resulting ``h`` is negative definite the transversal is flipped and
    the chart orientation recorded as -1, so ``|Vol| = 1`` and ``h > 0``.
    """
    K = x.order
    if K < 2:
        raise InsufficientOrder("need jet order >= 2 for the second fundamental form")
    x_i = [x.diff(i) for i in range(n)]
    x_ij = {(i, j): x_i[i].diff(j) for i, j in _sym(n)}
    like = x_i[0][0]
    nu = JetVector(constant(float(c), like.num_vars, like.order) for c in hint)
    V = jet_det(_columns_matrix([*x_i, nu], K - 1))
    if abs(V.value) < 1e-12 * max(1.0, float(np.abs(np.stack([xi.value() for xi in x_i])).max()) ** n):
        raise DegenerateFrame(f"transversal hint is tangent at u={u}")
    e = nu * V.reciprocal()

    M = _columns_matrix([*x_i, e], K - 2)
    try:
        sols = jet_solve_many(M, [x_ij[p].components for p in _sym(n)])
    except SingularJetMatrix as exc:
        raise DegenerateFrame(f"degenerate Darboux frame at u={u}: {exc}") from exc
    h = [[None] * n for _ in range(n)]
    for (i, j), s in zip(_sym(n), sols):
        h[i][j] = h[j][i] = s[n]

    hv = values(h)
    eig = np.linalg.eigvalsh(0.5 * (hv + hv.T))
    scale = max(1.0, float(np.abs(eig).max()))
    if np.all(eig > 0):
        orientation = 1
    elif np.all(eig < 0):
        orientation = -1
        e = -e
        h = [[-hij for hij in row] for row in h]
    elif np.any(np.abs(eig) <= DEGENERATE_H * scale):
        raise DegenerateFrame(f"det h vanishes at u={u} (eigenvalues {eig})")
    else:
        raise NotConvex(f"h is indefinite at u={u} (eigenvalues {eig}); not locally strongly convex")
    return DarbouxFrame(n, np.asarray(u, float), K, x, x_i, x_ij, e, h, orientation)


def fundamental_quantities(frame: DarbouxFrame) -> MetricData:
    """``H = |det h|``, Blaschke metric ``G = H^{-1/(n+2)} h`` and its inverse."""
    n = frame.n
    H = jet_det(frame.h)
    if H.value < DEGENERATE_H:
        raise DegenerateFrame(f"H = {H.value:.3e} is degenerate at u={frame.u}")
    s = pow_real(H, -1.0 / (n + 2))
    G = [[s * frame.h[i][j] for j in range(n)] for i in range(n)]
    return MetricData(frame.h, H, G, jet_inverse(G))


def levi_civita(G: list[list[Jet]], G_inv: list[list[Jet]]) -> list[list[list[Jet]]]:
    """Christoffel symbols ``Gamma[k][i][j]`` of a metric given as jets.

    Derivatives are taken in the first ``len(G)`` ring variables; the result
    has one order less than ``G``.
    """
    m = len(G)
    order = G[0][0].order - 1
    dG = [[[G[i][j].diff(l) for j in range(m)] for i in range(m)] for l in range(m)]
    Ginv = [[g.truncate(order) for g in row] for row in G_inv]
    out = [[[None] * m for _ in range(m)] for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            first = [dG[i][j][l] + dG[j][i][l] - dG[l][i][j] for l in range(m)]
            for k in range(m):
                val = sum((Ginv[k][l] * first[l] for l in range(1, m)), start=Ginv[k][0] * first[0]) * 0.5
                out[k][i][j] = out[k][j][i] = val
    return out


def affine_normal(frame: DarbouxFrame, metric: MetricData):
    """Affine normal ``Y = (1/n) Laplacian_G x`` and the Levi-Civita symbols of ``G``."""
    n = frame.n
    K = frame.order
    if K < 3:
        raise InsufficientOrder("need jet order >= 3 for the affine normal")
    Gamma_LC = levi_civita(metric.G, metric.G_inv)
    o = K - 3
    Ginv = [[g.truncate(o) for g in row] for row in metric.G_inv]
    xk = [v.truncate(o) for v in frame.x_i]
    comps = []
    for r in range(n + 1):
        total = None
        for i in range(n):
            for j in range(n):
                lap = frame.x_ij[(min(i, j), max(i, j))][r].truncate(o)
                for k in range(n):
                    lap = lap - Gamma_LC[k][i][j] * xk[k][r]
                term = Ginv[i][j] * lap
                total = term if total is None else total + term
        comps.append(total * (1.0 / n))
    return JetVector(comps), Gamma_LC


def connections_and_pick(frame: DarbouxFrame, metric: MetricData, Y: JetVector, Gamma_LC):
    """Induced connection w.r.t. ``Y``, difference tensor and Fubini-Pick form (jets)."""
    n = frame.n
    o = Y.order
    M = _columns_matrix([*frame.x_i, Y], o)
    try:
        sols = jet_solve_many(M, [frame.x_ij[p].truncate(o).components for p in _sym(n)])
    except SingularJetMatrix as exc:
        raise DegenerateFrame(f"affine normal is tangent at u={frame.u}: {exc}") from exc
    Gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    normal_coeff = [[None] * n for _ in range(n)]
    for (i, j), s in zip(_sym(n), sols):
        for k in range(n):
            Gamma[k][i][j] = Gamma[k][j][i] = s[k]
        normal_coeff[i][j] = normal_coeff[j][i] = s[n]
    A_mixed = [[[Gamma[k][i][j] - Gamma_LC[k][i][j] for j in range(n)] for i in range(n)] for k in range(n)]
    G = [[g.truncate(o) for g in row] for row in metric.G]
    A_cov = [
        [
            [sum((G[k][l] * A_mixed[l][i][j] for l in range(1, n)), start=G[k][0] * A_mixed[0][i][j]) for k in range(n)]
            for j in range(n)
        ]
        for i in range(n)
    ]
    return Gamma, A_mixed, A_cov, normal_coeff


def shape_operator(frame: DarbouxFrame, metric: MetricData, Y: JetVector):
    """Jets of ``B_mixed`` (``B^j_i`` at ``[j][i]``), ``B_cov`` and the normal part of ``Y_i``."""
    n = frame.n
    o = Y.order - 1
    if o < 0:
        raise InsufficientOrder("need jet order >= 4 for the affine shape operator")
    Yi = [Y.diff(i) for i in range(n)]
    M = _columns_matrix([*frame.x_i, Y], o)
    try:
        sols = jet_solve_many(M, [y.components for y in Yi])
    except SingularJetMatrix as exc:
        raise DegenerateFrame(f"affine normal is tangent at u={frame.u}: {exc}") from exc
    B_mixed = [[-sols[i][j] for i in range(n)] for j in range(n)]
    normal = [sols[i][n] for i in range(n)]
    G = [[g.truncate(o) for g in row] for row in metric.G]
    B_cov = [
        [sum((G[i][k] * B_mixed[k][j] for k in range(1, n)), start=G[i][0] * B_mixed[0][j]) for j in range(n)]
        for i in range(n)
    ]
    return B_mixed, B_cov, normal


def principal_curvatures(B_cov: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Eigenvalues of the shape operator via the symmetric pencil ``(B, G)``, ascending."""
    Bs = 0.5 * (B_cov + B_cov.T)
    return np.sort(scipy.linalg.eigh(Bs, G, eigvals_only=True))


def normalized_symmetric(lam: Sequence[float]) -> np.ndarray:
    """``L_r = e_r(lambda) / C(n, r)`` for ``r = 1..n``."""
    lam = np.asarray(lam, dtype=float)
    n = len(lam)
    out = np.empty(n)
    for r in range(1, n + 1):
        e_r = math.fsum(math.prod(lam[list(c)]) for c in combinations(range(n), r))
        out[r - 1] = e_r / math.comb(n, r)
    return out


@dataclass
class FrameJets:
    x: JetVector
    x_i: list[JetVector]
    Y: JetVector
    G: list[list[Jet]]
    G_inv: list[list[Jet]]
    H: Jet
    Gamma_LC: list
    A_cov: list
    A_mixed: list
    B_mixed: list | None
    B_cov: list | None


@dataclass
class FramePoint:
    """All equiaffine invariants of an immersion at one parameter point."""

    u: np.ndarray
    order: int
    x: np.ndarray
    x_i: np.ndarray
    e_np1: np.ndarray
    orientation: int
    h: np.ndarray
    H: float
    G: np.ndarray
    G_inv: np.ndarray
    Gamma: np.ndarray
    Gamma_LC: np.ndarray
    A_mixed: np.ndarray
    A_cov: np.ndarray
    Y: np.ndarray
    B_mixed: np.ndarray
    B_cov: np.ndarray
    lam: np.ndarray
    L: np.ndarray
    residuals: dict[str, float | None]
    jets: FrameJets = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def K(self) -> float:
        """``L_n``, the normalized Gauss-Kronecker curvature."""
        return float(self.L[-1])

    @property
    def L1(self) -> float:
        return float(self.L[0])

    @property
    def A_norm2(self) -> float:
        """``|A|^2_G = A_ijk A^ijk``."""
        Gi = self.G_inv
        return float(np.einsum("ijk,ia,jb,kc,abc->", self.A_cov, Gi, Gi, Gi, self.A_cov))


def _vals3(T) -> np.ndarray:
    return np.array([[[t.value for t in row] for row in mat] for mat in T])


def normal_data(x: JetVector, n: int, u: Sequence[float], hint: np.ndarray):
    """Darboux frame, metric data, affine normal jet and Levi-Civita symbols."""
    frame = darboux_frame(x, n, np.asarray(u, dtype=float), hint)
    metric = fundamental_quantities(frame)
    Y, Gamma_LC = affine_normal(frame, metric)
    return frame, metric, Y, Gamma_LC


def tangent_values(x: JetVector, n: int) -> np.ndarray:
    return np.array([[x[r].diff(i).value for r in range(len(x))] for i in range(n)])


def frame_from_jets(x: JetVector, n: int, u: Sequence[float], hint: np.ndarray) -> FramePoint:
    """Compute a :class:`FramePoint` from the jet of an immersion at ``u``."""
    u = np.asarray(u, dtype=float)
    frame, metric, Y, Gamma_LC = normal_data(x, n, u, hint)
    Gamma, A_mixed, A_cov, normal_coeff = connections_and_pick(frame, metric, Y, Gamma_LC)
    if Y.order < 1:
        raise InsufficientOrder("need jet order >= 4 for the affine shape operator")
    B_mixed, B_cov, yi_normal = shape_operator(frame, metric, Y)

    Gv = values(metric.G)
    Gi = values(metric.G_inv)
    Hv = metric.H.value
    xi = np.array([v.value() for v in frame.x_i])
    Yv = Y.value()
    Am = _vals3(A_mixed)
    Ac = _vals3(A_cov)
    Bm = values(B_mixed)
    Bc = values(B_cov)
    lam = principal_curvatures(Bc, Gv)

    vol_y = frame.orientation * volume([*xi, Yv])
    h_scale = Hv ** (1.0 / (n + 2))
    residuals: dict[str, float | None] = {
        "unimodular": abs(frame.orientation * volume([*xi, frame.e_np1.value()]) - 1.0),
        "volume_identity": abs(vol_y - h_scale) / h_scale,
        "detg": abs(np.linalg.det(Gv) - Hv ** (2.0 / (n + 2))),
        "apolarity": float(np.abs(np.einsum("ij,kij->k", Gi, Am)).max()),
        "gauss_y_normal": float(np.abs(values(normal_coeff) - Gv).max()),
        "yi_normal": float(np.abs([c.value for c in yi_normal]).max()),
        "b_symmetry": float(np.abs(Bc - Bc.T).max()),
    }
    jets = FrameJets(frame.x, frame.x_i, Y, metric.G, metric.G_inv, metric.H, Gamma_LC, A_cov, A_mixed, B_mixed, B_cov)
    fp = FramePoint(
        u=u,
        order=x.order,
        x=frame.x.value(),
        x_i=xi,
        e_np1=frame.e_np1.value(),
        orientation=frame.orientation,
        h=values(frame.h),
        H=Hv,
        G=Gv,
        G_inv=Gi,
        Gamma=_vals3(Gamma),
        Gamma_LC=_vals3(Gamma_LC),
        A_mixed=Am,
        A_cov=Ac,
        Y=Yv,
        B_mixed=Bm,
        B_cov=Bc,
        lam=lam,
        L=normalized_symmetric(lam),
        residuals=residuals,
        jets=jets,
    )
    residuals.update(gauss_codazzi_residuals(fp))
    return fp


def frame_point(imm: Immersion, u: Sequence[float], order: int = 5) -> FramePoint:
    """Evaluate every equiaffine invariant of ``imm`` at ``u``."""
    u = np.asarray(u, dtype=float)
    x = imm.evaluate(u, order)
    return frame_from_jets(x, imm.n, u, imm.hint(u, tangent_values(x, imm.n)))


def riemann_lowered(Gamma: list, G: np.ndarray) -> np.ndarray:
    """``R_ijkl = G(R(d_i, d_j) d_k, d_l)`` at the base point from Christoffel jets.

    ``R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``; with
    this convention a round unit sphere has ``R_1212 = -1``.
    """
    n = len(G)
    Gv = _vals3(Gamma)
    dGam = np.array([[[[Gamma[m][j][k].diff(i).value for k in range(n)] for j in range(n)] for m in range(n)] for i in range(n)])
    # dGam[i, m, j, k] = d_i Gamma^m_jk
    R = (
        np.einsum("imjk->mkij", dGam)
        - np.einsum("jmik->mkij", dGam)
        + np.einsum("mip,pjk->mkij", Gv, Gv)
        - np.einsum("mjp,pik->mkij", Gv, Gv)
    )
    # R[m, k, i, j] = R^m_{k i j}
    return np.einsum("lm,mkij->ijkl", G, R)


def gauss_codazzi_residuals(fp: FramePoint) -> dict[str, float | None]:
    """Max-norm residuals of the affine Gauss and the two Codazzi equations.

    Entries are ``None`` when the jet order does not allow the derivative.
    """
    out: dict[str, float | None] = {"gauss": None, "codazzi_A": None, "codazzi_B": None}
    j = fp.jets
    n = fp.n
    G, B, A = fp.G, fp.B_cov, fp.A_cov
    Am = fp.A_mixed
    Gam = fp.Gamma_LC
    order_A = j.A_cov[0][0][0].order
    if order_A >= 1:
        R = riemann_lowered(j.Gamma_LC, G)
        rhs = (
            np.einsum("mik,mjl->ijkl", Am, A)
            - np.einsum("mil,mjk->ijkl", Am, A)
            + 0.5
            * (
                np.einsum("il,jk->ijkl", G, B)
                + np.einsum("jk,il->ijkl", G, B)
                - np.einsum("ik,jl->ijkl", G, B)
                - np.einsum("jl,ik->ijkl", G, B)
            )
        )
        out["gauss"] = float(np.abs(R - rhs).max())

        dA = np.array([[[[j.A_cov[a][b][c].diff(l).value for l in range(n)] for c in range(n)] for b in range(n)] for a in range(n)])
        # covariant derivative A_ijk,l
        cov = (
            dA
            - np.einsum("mli,mjk->ijkl", Gam, A)
            - np.einsum("mlj,imk->ijkl", Gam, A)
            - np.einsum("mlk,ijm->ijkl", Gam, A)
        )
        lhs = cov - np.swapaxes(cov, 2, 3)
        rhs = 0.5 * (
            np.einsum("ik,jl->ijkl", G, B)
            + np.einsum("jk,il->ijkl", G, B)
            - np.einsum("il,jk->ijkl", G, B)
            - np.einsum("jl,ik->ijkl", G, B)
        )
        out["codazzi_A"] = float(np.abs(lhs - rhs).max())
    if j.B_cov is not None and j.B_cov[0][0].order >= 1:
        dB = np.array([[[j.B_cov[a][b].diff(k).value for k in range(n)] for b in range(n)] for a in range(n)])
        cov = dB - np.einsum("mki,mj->ijk", Gam, B) - np.einsum("mkj,im->ijk", Gam, B)
        lhs = cov - np.swapaxes(cov, 1, 2)
        rhs = np.einsum("lij,kl->ijk", Am, B) - np.einsum("lik,jl->ijk", Am, B)
        out["codazzi_B"] = float(np.abs(lhs - rhs).max())
    return out

"""Symbolic equiaffine invariants of a graph ``z = f(u, v)``.

Independent of the jet pipeline: everything is differentiated by sympy.  For a
graph the vertical axis is already unimodular, ``h = Hess f`` and the tangent
components of ``Y_i`` give ``B^r_i = -d_i Y^r`` directly.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

u, v = sp.symbols("u v", real=True)
X = (u, v)


def graph_invariants(f, point):
    f = sp.sympify(f, locals={"u": u, "v": v})
    hess = sp.Matrix(2, 2, lambda i, j: sp.diff(f, X[i], X[j]))
    H = hess.det()
    G = hess * H ** sp.Rational(-1, 4)
    Gi = G.inv()
    chris = [[[sum(Gi[k, l] * (sp.diff(G[i, l], X[j]) + sp.diff(G[j, l], X[i]) - sp.diff(G[i, j], X[l])) for l in range(2)) / 2
               for j in range(2)] for i in range(2)] for k in range(2)]
    df = [sp.diff(f, X[k]) for k in range(2)]
    Y = [
        -sum(Gi[i, j] * chris[0][i][j] for i in range(2) for j in range(2)) / 2,
        -sum(Gi[i, j] * chris[1][i][j] for i in range(2) for j in range(2)) / 2,
        sum(Gi[i, j] * (hess[i, j] - sum(chris[k][i][j] * df[k] for k in range(2))) for i in range(2) for j in range(2)) / 2,
    ]
    subs = {u: point[0], v: point[1]}
    B = np.array([[float(-sp.diff(Y[r], X[i]).subs(subs)) for i in range(2)] for r in range(2)])
    Gv = np.array(G.subs(subs).evalf(), dtype=float)
    lam = np.sort(np.linalg.eigvals(B).real)
    return {
        "H": float(H.subs(subs)),
        "G": Gv,
        "Y": np.array([float(y.subs(subs)) for y in Y]),
        "B_mixed": B,
        "lambda": lam,
    }


if __name__ == "__main__":
    for f, pt in [("(u**2 + v**2)/2 + u**3/10", (0.1, -0.05)), ("(u**2 + v**2)/2 + u**3/10", (-0.2, 0.2)), ("1/(u*v)", (1.3, 0.7)), ("exp(u) + v**2 + u*v/3", (0.2, 0.1))]:
        out = graph_invariants(f, pt)
        print(f, pt)
        for k, val in out.items():
            print(" ", k, np.array2string(np.asarray(val), precision=17, separator=", "))

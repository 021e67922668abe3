"""Brute-force LP oracle for small problems."""

import itertools

import numpy as np


def vertex_optimum(c, A, relations, b, tol=1e-9):
    """Minimum of ``c @ x`` over the vertices of the feasible set.

    Vertices are found by solving every square subsystem of active
    constraints (including ``x >= 0``) and keeping the feasible solutions.
    Returns ``None`` when no vertex is feasible.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    rows = np.vstack([A, -np.eye(n)])
    rhs = np.concatenate([b, np.zeros(n)])
    eq = [i for i, rel in enumerate(relations) if rel == "="]
    others = [i for i in range(m + n) if i not in eq]
    best = None
    for combo in itertools.combinations(others, n - len(eq)):
        active = eq + list(combo)
        M = rows[active]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs[active])
        lhs = A @ x
        ok = np.all(x >= -tol)
        for i, rel in enumerate(relations):
            scale = tol * (1 + abs(b[i]))
            if rel == "<=":
                ok &= lhs[i] <= b[i] + scale
            elif rel == ">=":
                ok &= lhs[i] >= b[i] - scale
            else:
                ok &= abs(lhs[i] - b[i]) <= scale
        if ok:
            value = float(c @ x)
            best = value if best is None else min(best, value)
    return best

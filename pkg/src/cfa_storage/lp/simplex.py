"""Dense two-phase primal simplex.

Problems are stated as::

    minimize    c @ x
    subject to  A[i] @ x  (<=, =, >=)  b[i]
                0 <= x <= upper

Upper bounds are turned into rows, rows with a negative right-hand side are
negated, and every row gets a slack, surplus or artificial column.  Phase 1
minimizes the sum of artificials, phase 2 the true objective.

Entering columns are chosen by Bland's rule (lowest eligible index with a
negative reduced cost) and leaving rows by minimum ratio, ties broken by the
lowest basic index.  The result is fully deterministic: the same input always
yields the same vertex, including among degenerate optima.  ``rule="dantzig"``
selects the most negative reduced cost instead and falls back to Bland's rule
after a run of degenerate pivots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, TextIO

import numba
import numpy as np

PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-8
OPTIMALITY_TOL = 1e-8

_RULES = {"bland": 0, "dantzig": 1}
_STATUS = {0: "optimal", 1: "unbounded", 2: "iteration_limit"}
_RELATIONS = ("<=", "=", ">=")
_CODE = {"<=": 0, "=": 1, ">=": 2}


@lru_cache(maxsize=256)
def _relation_codes(relations: tuple[str, ...]) -> np.ndarray:
    codes = np.array([_CODE[rel] for rel in relations], dtype=np.int8)
    codes.setflags(write=False)
    return codes


class SimplexError(RuntimeError):
    """Raised when the solver loses its optimality certificate."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """A minimization LP over nonnegative variables.

    Attributes:
        objective: Cost coefficients ``c``.
        A: Constraint matrix, one row per constraint.
        relations: ``"<="``, ``"="`` or ``">="`` for every row.
        rhs: Right-hand sides.
        upper: Optional upper bounds (``inf`` for none).
        offset: Constant added to ``c @ x`` when reporting the model's value;
            it does not take part in the solve.
        names: Optional variable names, used by :func:`dump`.
    """

    objective: np.ndarray
    A: np.ndarray
    relations: tuple[str, ...]
    rhs: np.ndarray
    upper: np.ndarray | None = None
    offset: float = 0.0
    names: tuple[str, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.rhs, dtype=float)
        if A.ndim != 2:
            A = A.reshape(len(b), c.size)
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "relations", tuple(self.relations))
        if A.shape != (b.size, c.size):
            raise ValueError(f"constraint matrix has shape {A.shape}, expected {(b.size, c.size)}")
        if len(self.relations) != b.size:
            raise ValueError("one relation per constraint row is required")
        try:
            _relation_codes(self.relations)
        except KeyError:
            raise ValueError(f"relations must be among {_RELATIONS}") from None
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(A)) and np.all(np.isfinite(c))):
            raise ValueError("objective, matrix and rhs must be finite")
        if self.upper is not None:
            upper = np.asarray(self.upper, dtype=float)
            if upper.shape != c.shape or np.any(upper < 0):
                raise ValueError("upper bounds must match the variables and be nonnegative")
            object.__setattr__(self, "upper", upper)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    def violations(self, x: np.ndarray) -> np.ndarray:
        """Amount by which ``x`` violates each row (zero when satisfied)."""
        lhs = self.A @ x
        out = np.zeros(self.n_rows)
        for i, rel in enumerate(self.relations):
            if rel == "<=":
                out[i] = max(lhs[i] - self.rhs[i], 0.0)
            elif rel == ">=":
                out[i] = max(self.rhs[i] - lhs[i], 0.0)
            else:
                out[i] = abs(lhs[i] - self.rhs[i])
        return out


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    x: np.ndarray
    objective_value: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@numba.njit(cache=True)
def _pivot(T, basis, row, col):
    n1 = T.shape[1]
    piv = T[row, col]
    nz = np.empty(n1, np.int64)
    k = 0
    for j in range(n1):
        v = T[row, j]
        if v != 0.0:
            T[row, j] = v / piv
            nz[k] = j
            k += 1
    T[row, col] = 1.0
    for i in range(T.shape[0]):
        if i == row:
            continue
        f = T[i, col]
        if f != 0.0:
            for kk in range(k):
                j = nz[kk]
                T[i, j] -= f * T[row, j]
            T[i, col] = 0.0
    basis[row] = col


@numba.njit(cache=True)
def _iterate(T, basis, eligible, rule, tol, max_iter):
    m = T.shape[0] - 1
    rc = T.shape[1] - 1
    it = 0
    degenerate_run = 0
    use_bland = rule == 0
    while it < max_iter:
        q = -1
        if use_bland:
            for j in range(rc):
                if eligible[j] and T[m, j] < -tol:
                    q = j
                    break
        else:
            best = -tol
            for j in range(rc):
                if eligible[j] and T[m, j] < best:
                    best = T[m, j]
                    q = j
        if q < 0:
            return 0, it

        r = -1
        best_ratio = 0.0
        for i in range(m):
            a = T[i, q]
            if a > tol:
                ratio = T[i, rc] / a
                if r < 0 or ratio < best_ratio - 1e-12:
                    r = i
                    best_ratio = ratio
                elif ratio <= best_ratio + 1e-12 and basis[i] < basis[r]:
                    r = i
                    best_ratio = ratio
        if r < 0:
            return 1, it

        if best_ratio <= 1e-12:
            degenerate_run += 1
            if degenerate_run > 50:
                use_bland = True
        else:
            degenerate_run = 0
        _pivot(T, basis, r, q)
        it += 1
    return 2, it


@numba.njit(cache=True)
def _tableau(A, b, codes):
    # Negate rows with a negative rhs and append slack, surplus and artificial columns.
    m, n = A.shape
    n_slack = 0
    n_art = 0
    flip = np.empty(m, np.bool_)
    kind = np.empty(m, np.int8)
    for i in range(m):
        flip[i] = b[i] < 0
        k = codes[i]
        if flip[i] and k != 1:
            k = 2 - k
        kind[i] = k
        if k != 1:
            n_slack += 1
        if k != 0:
            n_art += 1
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    basis = np.empty(m, np.int64)
    is_art = np.zeros(m, np.bool_)
    s = n
    a = n + n_slack
    for i in range(m):
        sign = -1.0 if flip[i] else 1.0
        for j in range(n):
            T[i, j] = sign * A[i, j]
        T[i, width] = sign * b[i]
        if kind[i] == 0:
            T[i, s] = 1.0
            basis[i] = s
            s += 1
            continue
        if kind[i] == 2:
            T[i, s] = -1.0
            s += 1
        T[i, a] = 1.0
        basis[i] = a
        is_art[i] = True
        a += 1
    return T, basis, is_art, n_slack


def _with_bounds(lp: LinearProgram):
    codes = _relation_codes(lp.relations)
    if lp.upper is None:
        return lp.A, lp.rhs, codes
    bounded = np.flatnonzero(np.isfinite(lp.upper))
    if not bounded.size:
        return lp.A, lp.rhs, codes
    A = np.vstack([lp.A, np.eye(lp.n_vars)[bounded]])
    b = np.concatenate([lp.rhs, lp.upper[bounded]])
    return A, b, np.concatenate([codes, np.zeros(bounded.size, np.int8)])


def solve(lp: LinearProgram, rule: str = "bland", max_iter: int | None = None) -> LpSolution:
    """Solve a linear program.

    Args:
        lp: The problem.
        rule: Entering-column rule, ``"bland"`` or ``"dantzig"``.
        max_iter: Pivot limit per phase; defaults to ``50 * (rows + columns)``.

    Returns:
        The solution; ``status`` is ``"optimal"``, ``"infeasible"`` or
        ``"unbounded"``.
    """
    A, b, codes = _with_bounds(lp)
    m, n = A.shape
    T, basis, is_art, n_slack = _tableau(A, b, codes)
    width = T.shape[1] - 1
    eligible = np.zeros(width, dtype=np.bool_)
    eligible[: n + n_slack] = True
    code = _RULES[rule]
    limit = max_iter if max_iter is not None else 50 * (m + width)
    iterations = 0

    if is_art.any():
        T[m, : n + n_slack] = -T[:m][is_art, : n + n_slack].sum(axis=0)
        T[m, -1] = -T[:m][is_art, -1].sum()
        status, it = _iterate(T, basis, eligible, code, PIVOT_TOL, limit)
        iterations += it
        if status == 2:
            return _failed("iteration_limit", lp, iterations)
        if -T[m, -1] > FEASIBILITY_TOL:
            return _failed("infeasible", lp, iterations)
        for i in np.flatnonzero(basis >= n + n_slack):
            candidates = np.flatnonzero(np.abs(T[i, : n + n_slack]) > PIVOT_TOL)
            if candidates.size:
                _pivot(T, basis, i, int(candidates[0]))
            # otherwise the row is redundant; its artificial stays basic at zero

    T[m] = 0.0
    T[m, :n] = lp.objective
    cb = np.zeros(m)
    structural = basis < n
    cb[structural] = lp.objective[basis[structural]]
    T[m] -= cb @ T[:m]
    status, it = _iterate(T, basis, eligible, code, PIVOT_TOL, limit)
    iterations += it
    if status != 0:
        return _failed(_STATUS[status], lp, iterations)
    if T[m, : n + n_slack].min(initial=0.0) < -OPTIMALITY_TOL:
        raise SimplexError("negative reduced cost at a reported optimum")

    x = np.zeros(n)
    structural = basis < n
    x[basis[structural]] = T[:m, -1][structural]
    x = np.maximum(x, 0.0)[: lp.n_vars]
    return LpSolution("optimal", x, float(lp.objective @ x), iterations)


def _failed(status: str, lp: LinearProgram, iterations: int) -> LpSolution:
    return LpSolution(status, np.full(lp.n_vars, np.nan), float("nan"), iterations)


def dump(lp: LinearProgram, stream: TextIO, digits: int = 10) -> None:
    """Write ``lp`` as a fixed-point table: one line per row, objective first."""
    names: Sequence[str] = lp.names or tuple(f"x{j}" for j in range(lp.n_vars))
    fmt = f"{{:.{digits}f}}"
    stream.write("# minimize c @ x + offset, x >= 0\n")
    stream.write("name\t" + "\t".join(names) + "\trel\trhs\n")
    stream.write("obj\t" + "\t".join(fmt.format(v) for v in lp.objective))
    stream.write("\t\t" + fmt.format(lp.offset) + "\n")
    for i in range(lp.n_rows):
        row = "\t".join(fmt.format(v) for v in lp.A[i])
        stream.write(f"c{i}\t{row}\t{lp.relations[i]}\t{fmt.format(lp.rhs[i])}\n")
    if lp.upper is not None:
        stream.write("upper\t" + "\t".join(fmt.format(v) for v in lp.upper) + "\t\t\n")

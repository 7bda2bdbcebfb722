"""Linear programming: internal two-phase simplex plus a scipy adapter seam.

The internal engine is a dense tableau simplex with Bland's anti-cycling
rule, meant for the small LPs that dominate this package (containment
tests, unit-scale conformance problems).  Large sparse conformance LPs
are routed to scipy's HiGHS backend through the same interface; the
``engine`` argument forces either path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog as _scipy_linprog

__all__ = ["LinearProgram", "LpSolution", "solve_lp"]

FEAS_TOL = 1e-9
OPT_TOL = 1e-9

# beyond this standard-form size the dense tableau is not worth it
_INTERNAL_MAX_ROWS = 400
_INTERNAL_MAX_COLS = 900


@dataclass
class LinearProgram:
    """min c @ x  s.t.  a_ub @ x <= b_ub,  a_eq @ x = b_eq, bounds per variable.

    ``bounds`` is a list of (lo, hi) with None for unbounded ends; omitted
    bounds default to (0, None).  Constraint matrices may be dense arrays
    or scipy sparse matrices.
    """

    c: np.ndarray
    a_ub: object = None
    b_ub: np.ndarray | None = None
    a_eq: object = None
    b_eq: np.ndarray | None = None
    bounds: list[tuple[float | None, float | None]] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.ndim != 1:
            raise ValueError("objective must be a vector")
        n = self.c.shape[0]
        for name in ("a_ub", "a_eq"):
            mat = getattr(self, name)
            if mat is not None and not sp.issparse(mat):
                setattr(self, name, np.asarray(mat, dtype=float))
        if self.b_ub is not None:
            self.b_ub = np.asarray(self.b_ub, dtype=float)
        if self.b_eq is not None:
            self.b_eq = np.asarray(self.b_eq, dtype=float)
        if (self.a_ub is None) != (self.b_ub is None):
            raise ValueError("a_ub and b_ub must be given together")
        if (self.a_eq is None) != (self.b_eq is None):
            raise ValueError("a_eq and b_eq must be given together")
        if self.a_ub is not None and self.a_ub.shape[1] != n:
            raise ValueError("a_ub column count does not match objective")
        if self.a_eq is not None and self.a_eq.shape[1] != n:
            raise ValueError("a_eq column count does not match objective")
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        if len(self.bounds) != n:
            raise ValueError("bounds length does not match objective")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        m = 0
        if self.b_ub is not None:
            m += self.b_ub.shape[0]
        if self.b_eq is not None:
            m += self.b_eq.shape[0]
        return m


@dataclass
class LpSolution:
    x: np.ndarray | None
    objective: float
    status: str  # optimal | infeasible | unbounded | solver-failure
    n_iterations: int = 0
    message: str = ""


def solve_lp(lp: LinearProgram, engine: str = "auto") -> LpSolution:
    """Solve a linear program; engine is ``auto``, ``internal`` or ``scipy``."""
    if engine not in ("auto", "internal", "scipy"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "auto":
        dense = not (sp.issparse(lp.a_ub) or sp.issparse(lp.a_eq))
        small = lp.n_rows <= _INTERNAL_MAX_ROWS and lp.n_vars <= _INTERNAL_MAX_COLS
        engine = "internal" if (dense and small) else "scipy"
    if engine == "internal":
        return _solve_internal(lp)
    return _solve_scipy(lp)


def _solve_scipy(lp: LinearProgram) -> LpSolution:
    res = _scipy_linprog(
        lp.c,
        A_ub=lp.a_ub,
        b_ub=lp.b_ub,
        A_eq=lp.a_eq,
        b_eq=lp.b_eq,
        bounds=lp.bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-9,
            "dual_feasibility_tolerance": 1e-9,
        },
    )
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "solver-failure"
    )
    x = np.asarray(res.x, dtype=float) if res.x is not None else None
    obj = float(res.fun) if status == "optimal" else np.nan
    return LpSolution(x=x, objective=obj, status=status,
                      n_iterations=int(getattr(res, "nit", 0) or 0),
                      message=str(res.message))


# ---------------------------------------------------------------------------
# internal engine


class _StandardForm:
    """min c z  s.t.  A z = b, z >= 0, with a back-map to original variables."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        a_ub = np.asarray(lp.a_ub.todense()) if sp.issparse(lp.a_ub) else lp.a_ub
        a_eq = np.asarray(lp.a_eq.todense()) if sp.issparse(lp.a_eq) else lp.a_eq
        # x_j = shift_j + sum_k map[j][k][1] * z_{map[j][k][0]}
        shift = np.zeros(n)
        pieces: list[list[tuple[int, float]]] = []
        extra_rows: list[tuple[int, float]] = []  # (var piece col, ub) from two-sided bounds
        col = 0
        for j, (lo, hi) in enumerate(lp.bounds):
            if lo is not None:
                shift[j] = lo
                pieces.append([(col, 1.0)])
                if hi is not None:
                    if hi < lo:
                        raise ValueError("bound hi < lo")
                    extra_rows.append((col, hi - lo))
                col += 1
            elif hi is not None:
                shift[j] = hi
                pieces.append([(col, -1.0)])
                col += 1
            else:
                pieces.append([(col, 1.0), (col + 1, -1.0)])
                col += 2
        n_z = col
        P = np.zeros((n, n_z))
        for j, plist in enumerate(pieces):
            for (k, s) in plist:
                P[j, k] = s
        rows_a: list[np.ndarray] = []
        rows_b: list[float] = []
        n_slack = (0 if lp.b_ub is None else lp.b_ub.shape[0]) + len(extra_rows)
        slack_i = 0
        total_cols = n_z + n_slack
        if lp.b_ub is not None:
            A = a_ub @ P
            b = lp.b_ub - a_ub @ shift
            for i in range(A.shape[0]):
                row = np.zeros(total_cols)
                row[:n_z] = A[i]
                row[n_z + slack_i] = 1.0
                rows_a.append(row)
                rows_b.append(b[i])
                slack_i += 1
        for (k, ub) in extra_rows:
            row = np.zeros(total_cols)
            row[k] = 1.0
            row[n_z + slack_i] = 1.0
            rows_a.append(row)
            rows_b.append(ub)
            slack_i += 1
        if lp.b_eq is not None:
            A = a_eq @ P
            b = lp.b_eq - a_eq @ shift
            for i in range(A.shape[0]):
                row = np.zeros(total_cols)
                row[:n_z] = A[i]
                rows_a.append(row)
                rows_b.append(b[i])
        self.A = np.asarray(rows_a) if rows_a else np.zeros((0, total_cols))
        self.b = np.asarray(rows_b)
        neg = self.b < 0
        self.A[neg] *= -1.0
        self.b[neg] *= -1.0
        cz = np.zeros(total_cols)
        cz[:n_z] = lp.c @ P
        self.c = cz
        self.obj_shift = float(lp.c @ shift)
        self.P = P
        self.shift = shift
        self.n_z = n_z

    def back_map(self, z: np.ndarray) -> np.ndarray:
        return self.shift + self.P @ z[: self.n_z]


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _bland_enter(red: np.ndarray, allowed: np.ndarray) -> int | None:
    idx = np.nonzero(allowed & (red < -OPT_TOL))[0]
    return int(idx[0]) if idx.size else None


def _bland_leave(T: np.ndarray, basis: np.ndarray, col: int) -> int | None:
    m = T.shape[0] - 1
    pos = T[:m, col] > FEAS_TOL
    if not np.any(pos):
        return None
    ratios = np.full(m, np.inf)
    ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
    best = ratios.min()
    ties = np.nonzero(ratios <= best + FEAS_TOL * (1.0 + abs(best)))[0]
    # anti-cycling: among ties choose the row whose basic variable has lowest index
    return int(ties[np.argmin(basis[ties])])


def _run_simplex(T, basis, allowed, max_iter):
    it = 0
    while it < max_iter:
        col = _bland_enter(T[-1, :-1], allowed)
        if col is None:
            return "optimal", it
        row = _bland_leave(T, basis, col)
        if row is None:
            return "unbounded", it
        _pivot(T, basis, row, col)
        it += 1
    return "solver-failure", it


def _solve_internal(lp: LinearProgram) -> LpSolution:
    try:
        std = _StandardForm(lp)
    except ValueError:
        raise
    A, b, c = std.A, std.b, std.c
    m, n = A.shape
    if m == 0:
        # only bounds; minimize directly at the shifted origin
        z = np.zeros(n)
        neg = c < -OPT_TOL
        if np.any(neg):
            return LpSolution(None, np.nan, "unbounded", 0, "cost decreases along a free ray")
        x = std.back_map(z)
        return LpSolution(x, float(std.obj_shift), "optimal", 0)
    # phase 1 tableau with artificial columns
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    allowed = np.ones(n + m, dtype=bool)
    status, it1 = _run_simplex(T, basis, allowed, max_iter=5000 + 30 * (n + m))
    if status == "solver-failure":
        return LpSolution(None, np.nan, "solver-failure", it1, "phase-1 iteration limit")
    phase1 = -T[-1, -1]
    if phase1 > FEAS_TOL * (1.0 + np.abs(b).sum()):
        return LpSolution(None, np.nan, "infeasible", it1, f"phase-1 objective {phase1:.3e}")
    # drive remaining artificials out of the basis or drop redundant rows
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n:
            piv_cols = np.nonzero(np.abs(T[i, :n]) > FEAS_TOL)[0]
            if piv_cols.size:
                _pivot(T, basis, i, int(piv_cols[0]))
            else:
                keep[i] = False
    rows = np.nonzero(keep)[0]
    T2 = np.zeros((rows.size + 1, n + 1))
    T2[:-1, :n] = T[rows][:, :n]
    T2[:-1, -1] = T[rows][:, -1]
    basis2 = basis[rows]
    T2[-1, :n] = c
    for r, bi in enumerate(basis2):
        if np.abs(c[bi]) > 0:
            T2[-1] -= c[bi] * T2[r]
    allowed2 = np.ones(n, dtype=bool)
    status, it2 = _run_simplex(T2, basis2, allowed2, max_iter=5000 + 30 * n)
    if status == "solver-failure":
        return LpSolution(None, np.nan, "solver-failure", it1 + it2, "phase-2 iteration limit")
    if status == "unbounded":
        return LpSolution(None, np.nan, "unbounded", it1 + it2)
    z = np.zeros(n)
    z[basis2] = T2[:-1, -1]
    x = std.back_map(z)
    obj = float(c @ z + std.obj_shift)
    return LpSolution(x, obj, "optimal", it1 + it2)

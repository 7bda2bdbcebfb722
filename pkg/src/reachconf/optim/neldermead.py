"""Derivative-free minimization: Nelder-Mead with adaptive coefficients and restarts.

Conformance costs are piecewise linear in the model parameters (they are
optimal values of parametric LPs), so gradient-based methods stall on
kinks; a restarted simplex search is the workhorse here.  Evaluations
returning NaN/inf are treated as +inf penalties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NlpProblem", "NlpSolution", "solve_nlp"]


@dataclass
class NlpProblem:
    fun: object
    x0: np.ndarray
    bounds: list[tuple[float | None, float | None]] | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.ndim != 1:
            raise ValueError("x0 must be a vector")
        if self.bounds is not None and len(self.bounds) != self.x0.shape[0]:
            raise ValueError("bounds length does not match x0")


@dataclass
class NlpSolution:
    x: np.ndarray
    fun: float
    n_evals: int
    status: str  # converged | budget-exhausted | failure
    restarts_used: int = 0


def _clip(x: np.ndarray, bounds) -> np.ndarray:
    if bounds is None:
        return x
    y = x.copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and y[i] < lo:
            y[i] = lo
        if hi is not None and y[i] > hi:
            y[i] = hi
    return y


class _Counter:
    """Evaluation wrapper: clips into bounds, counts calls, tracks the incumbent."""

    def __init__(self, fun, bounds, max_evals):
        self.fun = fun
        self.bounds = bounds
        self.max_evals = max_evals
        self.n = 0
        self.best_x = None
        self.best_f = np.inf

    def __call__(self, x):
        if self.n >= self.max_evals:
            raise _BudgetExhausted
        self.n += 1
        xc = _clip(x, self.bounds)
        val = self.fun(xc)
        try:
            val = float(val)
        except (TypeError, ValueError):
            val = np.inf
        if not np.isfinite(val):
            val = np.inf
        if val < self.best_f:
            self.best_x, self.best_f = xc.copy(), val
        return val


class _BudgetExhausted(Exception):
    pass


def _nelder_mead(f, x0, steps, xtol, ftol, max_iter):
    """One simplex run; returns (x_best, f_best, converged)."""
    n = x0.shape[0]
    # adaptive coefficients, better behaved as dimension grows
    alpha = 1.0
    beta = 1.0 + 2.0 / n
    gamma = 0.75 - 0.5 / n
    delta = 1.0 - 1.0 / n
    pts = [x0.copy()]
    for i in range(n):
        p = x0.copy()
        p[i] += steps[i]
        pts.append(p)
    vals = np.array([f(p) for p in pts])
    pts = np.array(pts)
    for _ in range(max_iter):
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        f_spread = vals[-1] - vals[0]
        x_spread = np.abs(pts[1:] - pts[0]).max(initial=0.0)
        if np.isfinite(vals[0]) and f_spread <= ftol * (1.0 + abs(vals[0])) \
                and x_spread <= xtol * (1.0 + np.abs(pts[0]).max()):
            return pts[0], vals[0], True
        centroid = pts[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - pts[-1])
        fr = f(xr)
        if fr < vals[0]:
            xe = centroid + beta * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
        elif fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
        else:
            if fr < vals[-1]:
                xc = centroid + gamma * (xr - centroid)
            else:
                xc = centroid - gamma * (centroid - pts[-1])
            fc = f(xc)
            if fc < min(fr, vals[-1]):
                pts[-1], vals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    pts[i] = pts[0] + delta * (pts[i] - pts[0])
                    vals[i] = f(pts[i])
    return pts[np.argmin(vals)], vals.min(), False


def solve_nlp(
    problem: NlpProblem,
    seed: int = 0,
    max_evals: int = 2000,
    restarts: int = 3,
    xtol: float = 1e-8,
    ftol: float = 1e-10,
    initial_step: float = 0.05,
) -> NlpSolution:
    """Minimize with restarted Nelder-Mead; deterministic for a fixed seed.

    Restart points are the incumbent best perturbed by seeded Gaussian
    noise scaled like the initial steps.  Returns the best point seen.
    """
    rng = np.random.default_rng(seed)
    x0 = _clip(problem.x0, problem.bounds)
    n = x0.shape[0]
    scale = initial_step * (1.0 + np.abs(x0))
    counter = _Counter(problem.fun, problem.bounds, max_evals)
    converged = False
    used = 0
    start = x0
    for attempt in range(restarts + 1):
        try:
            _, _, conv = _nelder_mead(
                counter, start, scale, xtol, ftol,
                max_iter=max(50, max_evals // (restarts + 1)),
            )
        except _BudgetExhausted:
            break
        used = attempt
        converged = converged or conv
        incumbent = counter.best_x if counter.best_x is not None else x0
        start = _clip(incumbent + scale * rng.standard_normal(n), problem.bounds)
    if counter.best_x is None or not np.isfinite(counter.best_f):
        return NlpSolution(x=x0, fun=np.inf, n_evals=counter.n,
                           status="failure", restarts_used=used)
    status = "converged" if converged else "budget-exhausted"
    return NlpSolution(x=counter.best_x, fun=float(counter.best_f),
                       n_evals=counter.n, status=status, restarts_used=used)

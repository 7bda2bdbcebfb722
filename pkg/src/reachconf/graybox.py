"""Gray-box conformance: fit model parameters, then scale the uncertainty.

Three schemes.  "sequential" estimates the parameter vector (plus center
shifts) by minimizing the summed per-step worst-case residual, then runs
the white-box program at the estimate.  "sequential-ls" does the same
with a least-squares residual, which is smoother but not linked to the
reach-set size.  "simultaneous" searches the parameters with the
white-box optimum itself as objective; each evaluation solves one
linear program, so it is the most expensive per step.

The worst-case residual lower-bounds the white-box objective at the same
parameters and centers, which is what makes the sequential scheme a
sensible surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conform import ConformResult, _weights, build_gos, identify_white
from .models import SimulationDivergedError, TestSuite, UncertaintySpec
from .optim import NlpProblem, solve_nlp

__all__ = [
    "GRAY_SCHEMES",
    "GrayResult",
    "deviation_cost_under",
    "deviation_cost_ls",
    "identify_gray",
]

GRAY_SCHEMES = ("sequential", "sequential-ls", "simultaneous")

_EVAL_BUDGET = {"sequential": 1200, "sequential-ls": 1200, "simultaneous": 150}


@dataclass(frozen=True)
class GrayResult:
    """Terminal white-box result at the fitted parameters."""

    status: str
    alpha: np.ndarray | None
    cdelta: np.ndarray | None
    cost: float
    containment_rate: float | None
    spec: UncertaintySpec | None
    p: np.ndarray
    nlp_cost: float
    n_evals: int
    white: ConformResult


def _center_shift(go, spec: UncertaintySpec, k: int) -> np.ndarray:
    shift = np.zeros(go.n_y)
    if spec.cdelta_x.size and np.any(spec.cdelta_x):
        shift = shift + go.C_bar[k] @ spec.cdelta_x
    if np.any(spec.cdelta_u):
        shift = shift + np.add.reduce(go.D_bar[k]) @ spec.cdelta_u
    return shift


def _shift_table(go, spec: UncertaintySpec) -> np.ndarray:
    return np.stack([_center_shift(go, spec, k) for k in go.steps()])


def _residuals(go, case, spec, k) -> np.ndarray:
    return case.samples[:, k, :] - go.y_ref[k] - _center_shift(go, spec, k)


def _residual_blocks(gos, suite, spec):
    """Per case: (constrained-step weights index k0, residual cube (n_s, K, n_y)).

    Center shifts depend only on the expansion matrices, which linear
    models share across cases; the table is cached by identity.
    """
    cache = {}
    for go, case in zip(gos, suite.cases):
        key = id(go.D_bar)
        if key not in cache:
            cache[key] = _shift_table(go, spec)
        yield go.k0, case.samples[:, go.k0 :, :] - go.y_ref[go.k0 :] - cache[key]


def deviation_cost_under(model, suite: TestSuite, spec: UncertaintySpec,
                         weights=None, gos=None) -> float:
    """Weighted sum over steps of the per-dimension worst absolute residual."""
    if gos is None:
        gos = build_gos(model, suite, spec)
    w = _weights(weights, suite.n_k)
    total = 0.0
    for k0, resid in _residual_blocks(gos, suite, spec):
        total += (w[k0:, None] * np.abs(resid).max(axis=0)).sum()
    return float(total)


def deviation_cost_ls(model, suite: TestSuite, spec: UncertaintySpec,
                      weights=None, gos=None) -> float:
    """Weighted sum of squared residuals."""
    if gos is None:
        gos = build_gos(model, suite, spec)
    w = _weights(weights, suite.n_k)
    total = 0.0
    for k0, resid in _residual_blocks(gos, suite, spec):
        total += (w[k0:, None] * (resid ** 2).sum(axis=0)).sum()
    return float(total)


_EVAL_ERRORS = (SimulationDivergedError, FloatingPointError,
                ZeroDivisionError, np.linalg.LinAlgError)


def identify_gray(model, suite: TestSuite, template: UncertaintySpec,
                  scheme: str = "sequential", p0=None, *,
                  constraints: str = "halfspace", weights=None,
                  fit_centers: bool = False, seed: int = 0,
                  max_evals: int | None = None, restarts: int = 2,
                  engine: str = "auto") -> GrayResult:
    """Derivative-free parameter search wrapped around the white-box program.

    ``fit_centers`` adds a shift of the input-set template center to the
    search variables; useful for nonlinear models, where center shifts
    cannot be folded into the linear program.  Linear models instead get
    their center shifts as extra search variables directly (sequential
    schemes) or from the inner linear program (simultaneous).
    """
    if scheme not in GRAY_SCHEMES:
        raise ValueError(f"unknown gray-box scheme {scheme!r}")
    if p0 is None:
        # default start mirrors the benchmark protocol: a small random
        # guess, not the stored (possibly true) parameter vector
        p0 = np.random.default_rng(seed).normal(0.0, 0.01, model.params.shape[0])
    p0 = np.asarray(p0, dtype=float)
    n_p = p0.shape[0]
    n_x, n_u = template.c_x.shape[0], template.c_u.shape[0]
    sequential = scheme != "simultaneous"
    cost_fn = deviation_cost_under if scheme == "sequential" else deviation_cost_ls
    use_cdelta = sequential and model.linear and not fit_centers
    use_cu = fit_centers
    x0 = [p0]
    if use_cdelta:
        x0.append(np.zeros(n_x + n_u))
    if use_cu:
        x0.append(np.zeros(n_u))
    x0 = np.concatenate(x0)

    def split(v):
        p = v[:n_p]
        cdelta = v[n_p : n_p + (n_x + n_u)] if use_cdelta else None
        cu = v[n_p + (n_x + n_u) * use_cdelta :] if use_cu else None
        return p, cdelta, cu

    def candidate_spec(cdelta, cu) -> UncertaintySpec:
        spec = template
        if cu is not None:
            spec = UncertaintySpec(
                c_x=spec.c_x, g_x=spec.g_x, c_u=spec.c_u + cu, g_u=spec.g_u,
                alpha_x=spec.alpha_x, alpha_u=spec.alpha_u)
        if cdelta is not None:
            spec = spec.with_alpha(np.concatenate([spec.alpha_x, spec.alpha_u]), cdelta)
        return spec

    if sequential:
        def objective(v):
            p, cdelta, cu = split(v)
            try:
                spec = candidate_spec(cdelta, cu)
                return cost_fn(model.with_params(p), suite, spec, weights)
            except _EVAL_ERRORS:
                return np.inf
    else:
        def objective(v):
            p, _, cu = split(v)
            try:
                spec = candidate_spec(None, cu)
                res = identify_white(model.with_params(p), suite, spec,
                                     constraints=constraints, weights=weights,
                                     recheck=False, engine=engine)
            except _EVAL_ERRORS:
                return np.inf
            return res.cost if res.status == "feasible" else np.inf

    budget = _EVAL_BUDGET[scheme] if max_evals is None else max_evals
    sol = solve_nlp(NlpProblem(fun=objective, x0=x0), seed=seed,
                    max_evals=budget, restarts=restarts)
    p_hat, cdelta_hat, cu_hat = split(sol.x)
    final_template = candidate_spec(None, cu_hat)
    white = identify_white(model.with_params(p_hat), suite, final_template,
                           constraints=constraints, weights=weights,
                           engine=engine, recheck=True)
    return GrayResult(status=white.status, alpha=white.alpha, cdelta=white.cdelta,
                      cost=white.cost, containment_rate=white.containment_rate,
                      spec=white.spec, p=p_hat, nlp_cost=sol.fun,
                      n_evals=sol.n_evals, white=white)

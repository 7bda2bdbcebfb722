"""Linearized deviation-to-output models and their reach sets.

For one test case the model is expanded around a reference trajectory
(nominal scenario shifted by the uncertainty-set centers).  The
expansion yields, per step k, a sensitivity ``C_bar[k]`` to the
initial-state deviation and sensitivities ``D_bar[k][i]`` to every input
deviation, so the step-k reach set is an affine image of the
uncertainty sets:

    R_k = y_ref[k] (+) C_bar[k] dX0 (+) sum_i D_bar[k][i] dU

plus an optional enclosure of the linearization error.  For linear
models the expansion is exact.  State-space models are expanded
directly; input-output models are lifted to a stacked-window state with
the measured window as exact initial state, so they carry no
initial-state uncertainty and constraints start at k = n_p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    NarxModel,
    SimulationDivergedError,
    StateSpaceModel,
    TestCase,
    UncertaintySpec,
    jacobians_narx,
    jacobians_ss,
    simulate_narx,
    simulate_ss,
)
from .zonotope import Zonotope, linear_map, minkowski_sum

__all__ = [
    "GOModel",
    "UnsupportedRemainderError",
    "build_go",
    "build_gos",
    "reach_go",
    "reference_trajectory",
    "REMAINDER_MODES",
]

REMAINDER_MODES = ("zero", "interval-hessian", "sampled")
SAMPLED_INFLATION = 1.2
SAMPLED_DRAWS = 30


class UnsupportedRemainderError(ValueError):
    """Requested remainder mode needs analytic bounds the model does not provide."""


@dataclass(frozen=True)
class GOModel:
    """Per-case linearized observation model.

    ``C_bar[k]`` and ``D_bar[k]`` (a list with entries for input steps
    0..k) are None for k < k0; input-output models only constrain
    outputs once a full measurement window exists.  ``E_rem[k]`` is a
    zonotopic enclosure of the linearization error or None for a zero
    remainder.
    """

    k0: int
    n_k: int
    n_y: int
    n_u: int
    y_ref: np.ndarray
    u_ref: np.ndarray
    C_bar: list
    D_bar: list
    E_rem: list
    rigorous: bool
    linear: bool

    def steps(self) -> range:
        """Indices of constrained output steps."""
        return range(self.k0, self.n_k)


def reference_trajectory(model, case: TestCase, spec: UncertaintySpec):
    """Reference initial state (or window) and reference inputs for one case."""
    u_ref = case.nominal_u + spec.c_u
    if model.kind == "statespace":
        if case.nominal_x0 is None:
            raise ValueError("state-space expansion needs nominal_x0 in the test case")
        if spec.c_x.shape[0] != model.n_x:
            raise ValueError("uncertainty spec x-part does not match the state dimension")
        return case.nominal_x0 + spec.c_x, u_ref
    if spec.c_x.size != 0:
        raise ValueError("input-output models take an empty x-part in the spec")
    return case.initial_window(model.n_p), u_ref


def build_go(model, case: TestCase, spec: UncertaintySpec,
             remainder: str = "zero", seed: int = 0) -> GOModel:
    """Expand the model around the reference trajectory of one test case."""
    if remainder not in REMAINDER_MODES:
        raise ValueError(f"unknown remainder mode {remainder!r}")
    if model.kind == "statespace":
        go = _go_statespace(model, case, spec, remainder)
    else:
        go = _go_narx(model, case, spec, remainder)
    if remainder == "sampled":
        go = _attach_sampled_remainder(model, case, spec, go, seed)
    return go


def build_gos(model, suite, spec: UncertaintySpec,
              remainder: str = "zero", seed: int = 0) -> list:
    """Expansions for every case of a suite.

    Linear models with no remainder request share one matrix build across
    cases (the Jacobians do not depend on the reference trajectory), which
    is what makes repeated evaluation inside parameter searches cheap.
    """
    if model.linear and remainder == "zero":
        if model.kind == "statespace":
            return _gos_linear_ss(model, suite, spec)
        return _gos_linear_narx(model, suite, spec)
    return [build_go(model, case, spec, remainder=remainder, seed=seed)
            for case in suite.cases]


def reach_go(go: GOModel, spec: UncertaintySpec, k: int, mode: str = "under") -> Zonotope:
    """Reach set of the expanded model at step k for the given scalings.

    ``mode="over"`` adds the remainder enclosure (when one was built);
    ``"under"`` is the first-order set the conformance problem
    constrains.
    """
    if mode not in ("under", "over"):
        raise ValueError(f"unknown reach mode {mode!r}")
    if not go.k0 <= k < go.n_k:
        raise ValueError(f"step {k} outside the constrained range [{go.k0}, {go.n_k})")
    z = Zonotope.point(go.y_ref[k])
    if spec.c_x.size:
        z = minkowski_sum(z, linear_map(go.C_bar[k], spec.x0_deviation_set()))
    du = spec.u_deviation_set()
    for i in range(k + 1):
        z = minkowski_sum(z, linear_map(go.D_bar[k][i], du))
    if mode == "over" and go.E_rem[k] is not None:
        z = minkowski_sum(z, go.E_rem[k])
    return z


def _check_finite(arr, what: str):
    if not np.all(np.isfinite(arr)):
        raise SimulationDivergedError(f"{what} became non-finite")


def _dev_box(ref: np.ndarray, dev: Zonotope):
    """Box containing ref and ref+dev, plus per-coordinate deviation bound."""
    c, r = dev.center, dev.radius()
    lo = ref + np.minimum(0.0, c - r)
    hi = ref + np.maximum(0.0, c + r)
    return lo, hi, np.abs(c) + r


def _quad_bound(H: np.ndarray, m: np.ndarray) -> np.ndarray:
    """0.5 * m' |H_o| m per output o."""
    return 0.5 * np.einsum("oij,i,j->o", np.abs(H), m, m)


# ---------------------------------------------------------------------------
# state-space expansion


def _go_statespace(model: StateSpaceModel, case, spec, remainder) -> GOModel:
    n_k = case.n_k
    x_bar0, u_ref = reference_trajectory(model, case, spec)
    n_x, n_y = model.n_x, model.n_y
    want_hessian = remainder == "interval-hessian"
    if want_hessian and (model.hess_bound_f is None or model.hess_bound_g is None):
        raise UnsupportedRemainderError(
            f"model {model.name!r} lacks analytic second-derivative bounds"
        )
    y_ref = np.empty((n_k, n_y))
    C_bar: list = [None] * n_k
    D_bar: list = [None] * n_k
    E_rem: list = [None] * n_k
    phis = [np.eye(n_x)]  # phis[j] at step k is A_{k-1} ... A_j, phis[k] = I
    B_hist: list = []
    L_x: list = []
    du_set = spec.u_deviation_set()
    dev_x = spec.x0_deviation_set() if spec.c_x.size else Zonotope.point(np.zeros(n_x))
    x = np.asarray(x_bar0, dtype=float)
    for k in range(n_k):
        u = u_ref[k]
        y_ref[k] = model.output(x, u)
        _check_finite(y_ref[k], f"reference output at step {k}")
        A, B, C, D = jacobians_ss(model, x, u)
        C_bar[k] = C @ phis[0]
        D_bar[k] = [C @ phis[i + 1] @ B_hist[i] for i in range(k)] + [D]
        if want_hessian:
            lo_x, hi_x, m_x = _dev_box(x, dev_x)
            lo_u, hi_u, m_u = _dev_box(u, du_set)
            m = np.concatenate([m_x, m_u])
            Hg = np.asarray(model.hess_bound_g(lo_x, hi_x, lo_u, hi_u, model.params))
            E_k = Zonotope.box(np.zeros(n_y), _quad_bound(Hg, m))
            for j in range(k):
                E_k = minkowski_sum(E_k, linear_map(C @ phis[j + 1], L_x[j]))
            E_rem[k] = E_k
            Hf = np.asarray(model.hess_bound_f(lo_x, hi_x, lo_u, hi_u, model.params))
            L_x_k = Zonotope.box(np.zeros(n_x), _quad_bound(Hf, m))
            L_x.append(L_x_k)
            dev_x = minkowski_sum(
                minkowski_sum(linear_map(A, dev_x), linear_map(B, du_set)), L_x_k
            )
        B_hist.append(B)
        if k < n_k - 1:
            x = model.step(x, u)
            _check_finite(x, f"reference state at step {k + 1}")
            phis = [A @ P for P in phis]
            phis.append(np.eye(n_x))
    return GOModel(k0=0, n_k=n_k, n_y=n_y, n_u=model.n_u, y_ref=y_ref,
                   u_ref=u_ref, C_bar=C_bar, D_bar=D_bar, E_rem=E_rem,
                   rigorous=model.linear or want_hessian, linear=model.linear)


# ---------------------------------------------------------------------------
# input-output (stacked window) expansion


def _go_narx(model: NarxModel, case, spec, remainder) -> GOModel:
    n_p, n_y, n_u = model.n_p, model.n_y, model.n_u
    n_k = case.n_k
    if n_k <= n_p:
        raise ValueError("trajectories must be longer than the model order")
    n_lift = model.n_lift
    window, u_ref = reference_trajectory(model, case, spec)
    want_hessian = remainder == "interval-hessian"
    if want_hessian and model.hess_bound_f is None:
        raise UnsupportedRemainderError(
            f"model {model.name!r} lacks analytic second-derivative bounds"
        )
    E_sel = np.hstack([np.zeros((n_y, n_lift - n_y)), np.eye(n_y)])
    y_ref = np.empty((n_k, n_y))
    y_ref[:n_p] = window
    A_ext: list = [None] * n_k
    B_lags_all: list = [None] * n_k
    L_hat: list = [None] * n_k
    du_set = spec.u_deviation_set()
    dev_w = Zonotope.point(np.zeros(n_lift))
    for k in range(n_p, n_k):
        y_hist = y_ref[k - n_p : k]
        u_hist = u_ref[k - n_p : k + 1]
        y_ref[k] = model.step(y_hist, u_hist)
        _check_finite(y_ref[k], f"reference output at step {k}")
        A_lags, B_lags = jacobians_narx(model, y_hist, u_hist)
        top = np.hstack([np.zeros(((n_p - 1) * n_y, n_y)), np.eye((n_p - 1) * n_y)]) \
            if n_p > 1 else np.zeros((0, n_lift))
        bottom = np.hstack([A_lags[n_p - 1 - t] for t in range(n_p)])
        A_ext[k] = np.vstack([top, bottom])
        B_lags_all[k] = B_lags
        if want_hessian:
            w_ref = y_hist.ravel()
            lo_w, hi_w, m_w = _dev_box(w_ref, dev_w)
            lo_u1, hi_u1, m_u1 = _dev_box(np.zeros(n_u), du_set)
            lo_u = np.concatenate([u_hist[t] + lo_u1 for t in range(n_p + 1)])
            hi_u = np.concatenate([u_hist[t] + hi_u1 for t in range(n_p + 1)])
            m = np.concatenate([m_w] + [m_u1] * (n_p + 1))
            Hf = np.asarray(model.hess_bound_f(
                np.concatenate([lo_w, lo_u]), np.concatenate([hi_w, hi_u]), model.params))
            L_k = Zonotope.box(np.zeros(n_y), _quad_bound(Hf, m))
            L_hat[k] = L_k
            nxt = linear_map(A_ext[k], dev_w)
            for lag in range(n_p + 1):
                nxt = minkowski_sum(nxt, linear_map(E_sel.T @ B_lags[lag], du_set))
            dev_w = minkowski_sum(nxt, linear_map(E_sel.T, L_k))
    C_bar: list = [None] * n_k
    D_bar: list = [None] * n_k
    E_rem: list = [None] * n_k
    for k in range(n_p, n_k):
        P = np.eye(n_lift)
        T = []  # T[j] = E_sel @ (A_ext[k] ... A_ext[k-j+1]) @ E_sel.T
        for j in range(k - n_p + 1):
            T.append(E_sel @ P @ E_sel.T)
            P = P @ A_ext[k - j]
        C_bar[k] = E_sel @ P  # P now spans l = 0..k-n_p, i.e. down to A_ext[n_p]
        D_row = []
        for i in range(k + 1):
            M = np.zeros((n_y, n_u))
            for j in range(k - n_p + 1):
                lag = k - i - j
                if 0 <= lag <= n_p:
                    M += T[j] @ B_lags_all[k - j][lag]
            D_row.append(M)
        D_bar[k] = D_row
        if want_hessian:
            E_k = Zonotope.point(np.zeros(n_y))
            for j in range(k - n_p + 1):
                E_k = minkowski_sum(E_k, linear_map(T[j], L_hat[k - j]))
            E_rem[k] = E_k
    return GOModel(k0=n_p, n_k=n_k, n_y=n_y, n_u=n_u, y_ref=y_ref,
                   u_ref=u_ref, C_bar=C_bar, D_bar=D_bar, E_rem=E_rem,
                   rigorous=model.linear or want_hessian, linear=model.linear)


# ---------------------------------------------------------------------------
# shared matrices for linear models


def _declared_linear_mismatch(lhs, rhs):
    return not np.allclose(lhs, rhs, rtol=1e-8, atol=1e-8)


def _gos_linear_ss(model: StateSpaceModel, suite, spec) -> list:
    n_k, n_x = suite.n_k, model.n_x
    z_x, z_u = np.zeros(n_x), np.zeros(model.n_u)
    A, B, C, D = jacobians_ss(model, z_x, z_u)
    probe_x = np.ones(n_x)
    probe_u = np.ones(model.n_u)
    if (_declared_linear_mismatch(model.step(probe_x, probe_u), A @ probe_x + B @ probe_u)
            or _declared_linear_mismatch(model.output(probe_x, probe_u),
                                         C @ probe_x + D @ probe_u)):
        raise ValueError(f"model {model.name!r} is declared linear but is not")
    powers = [np.eye(n_x)]
    for _ in range(n_k - 1):
        powers.append(A @ powers[-1])
    C_bar = [C @ powers[k] for k in range(n_k)]
    CB = [C @ powers[j] @ B for j in range(n_k - 1)]
    D_bar = [[CB[k - 1 - i] for i in range(k)] + [D] for k in range(n_k)]
    E_rem = [None] * n_k
    gos = []
    for case in suite.cases:
        x, u_ref = reference_trajectory(model, case, spec)
        y_ref = np.empty((n_k, model.n_y))
        for k in range(n_k):
            y_ref[k] = C @ x + D @ u_ref[k]
            if k < n_k - 1:
                x = A @ x + B @ u_ref[k]
        _check_finite(y_ref, "reference outputs")
        gos.append(GOModel(k0=0, n_k=n_k, n_y=model.n_y, n_u=model.n_u,
                           y_ref=y_ref, u_ref=u_ref, C_bar=C_bar, D_bar=D_bar,
                           E_rem=E_rem, rigorous=True, linear=True))
    return gos


def _gos_linear_narx(model: NarxModel, suite, spec) -> list:
    n_p, n_y, n_u = model.n_p, model.n_y, model.n_u
    n_k, n_lift = suite.n_k, model.n_lift
    if n_k <= n_p:
        raise ValueError("trajectories must be longer than the model order")
    zero_w = np.zeros((n_p, n_y))
    zero_u = np.zeros((n_p + 1, n_u))
    A_lags, B_lags = jacobians_narx(model, zero_w, zero_u)
    probe_w = np.ones((n_p, n_y))
    probe_u = np.ones((n_p + 1, n_u))
    lin = (sum(A_lags[lag - 1] @ probe_w[n_p - lag] for lag in range(1, n_p + 1))
           + sum(B_lags[lag] @ probe_u[n_p - lag] for lag in range(n_p + 1)))
    if _declared_linear_mismatch(model.step(probe_w, probe_u), lin):
        raise ValueError(f"model {model.name!r} is declared linear but is not")
    E_sel = np.hstack([np.zeros((n_y, n_lift - n_y)), np.eye(n_y)])
    top = np.hstack([np.zeros(((n_p - 1) * n_y, n_y)), np.eye((n_p - 1) * n_y)]) \
        if n_p > 1 else np.zeros((0, n_lift))
    A_ext = np.vstack([top, np.hstack([A_lags[n_p - 1 - t] for t in range(n_p)])])
    powers = [np.eye(n_lift)]
    for _ in range(n_k - n_p):
        powers.append(powers[-1] @ A_ext)
    T = [E_sel @ powers[j] @ E_sel.T for j in range(n_k - n_p)]
    C_bar: list = [None] * n_k
    D_bar: list = [None] * n_k
    for k in range(n_p, n_k):
        C_bar[k] = E_sel @ powers[k - n_p + 1]
        D_row = []
        for i in range(k + 1):
            M = np.zeros((n_y, n_u))
            for j in range(k - n_p + 1):
                lag = k - i - j
                if 0 <= lag <= n_p:
                    M += T[j] @ B_lags[lag]
            D_row.append(M)
        D_bar[k] = D_row
    E_rem = [None] * n_k
    gos = []
    for case in suite.cases:
        window, u_ref = reference_trajectory(model, case, spec)
        y_ref = np.empty((n_k, n_y))
        y_ref[:n_p] = window
        for k in range(n_p, n_k):
            y_ref[k] = (sum(A_lags[lag - 1] @ y_ref[k - lag] for lag in range(1, n_p + 1))
                        + sum(B_lags[lag] @ u_ref[k - lag] for lag in range(n_p + 1)))
        _check_finite(y_ref, "reference outputs")
        gos.append(GOModel(k0=n_p, n_k=n_k, n_y=n_y, n_u=n_u, y_ref=y_ref,
                           u_ref=u_ref, C_bar=C_bar, D_bar=D_bar, E_rem=E_rem,
                           rigorous=True, linear=True))
    return gos


# ---------------------------------------------------------------------------
# sampled remainder


def _linear_prediction(go: GOModel, dx0: np.ndarray | None, du_seq: np.ndarray) -> np.ndarray:
    """First-order outputs for given deviations (rows k < k0 are reference)."""
    ys = go.y_ref.copy()
    for k in go.steps():
        y = go.y_ref[k].copy()
        if dx0 is not None and dx0.size:
            y = y + go.C_bar[k] @ dx0
        for i in range(k + 1):
            y = y + go.D_bar[k][i] @ du_seq[i]
        ys[k] = y
    return ys


def _attach_sampled_remainder(model, case, spec, go: GOModel, seed: int) -> GOModel:
    """Empirical residual bound, inflated; flagged non-rigorous."""
    rng = np.random.default_rng(seed)
    x0_set = spec.x0_set() if spec.c_x.size else None
    u_set = spec.u_set()
    resid = np.zeros((go.n_k, go.n_y))
    for _ in range(SAMPLED_DRAWS):
        du = np.vstack([u_set.sample(rng) for _ in range(go.n_k)])
        u_seq = case.nominal_u + du
        if model.kind == "statespace":
            dx0 = x0_set.sample(rng) if x0_set is not None else np.zeros(model.n_x)
            y_exact = simulate_ss(model, case.nominal_x0 + dx0, u_seq)
            dx0_ref = dx0 - spec.c_x if spec.c_x.size else None
        else:
            y_exact = simulate_narx(model, go.y_ref[: model.n_p], u_seq)
            dx0_ref = None
        du_ref = u_seq - go.u_ref
        y_lin = _linear_prediction(go, dx0_ref, du_ref)
        resid = np.maximum(resid, np.abs(y_exact - y_lin))
    E_rem = list(go.E_rem)
    for k in go.steps():
        E_rem[k] = Zonotope.box(np.zeros(go.n_y), SAMPLED_INFLATION * resid[k])
    return GOModel(k0=go.k0, n_k=go.n_k, n_y=go.n_y, n_u=go.n_u,
                   y_ref=go.y_ref, u_ref=go.u_ref, C_bar=go.C_bar,
                   D_bar=go.D_bar, E_rem=E_rem, rigorous=False, linear=go.linear)

"""Reachset-conformant scaling of uncertainty templates via linear programming.

Given a model, recorded test cases and a zonotopic uncertainty template,
find nonnegative per-generator scalings (and, for linear models, center
shifts) of minimal weighted reach-set size such that every measured
output lies in the corresponding reach set of the linearized model.

Two equivalent constraint encodings are provided.  The halfspace
encoding intersects each reach set with facet directions computed from
the unscaled template, giving one small inequality block per (case,
step).  The generator encoding introduces one auxiliary coefficient
vector per measured point and is assembled sparse; it grows with the
sample count but avoids the combinatorial facet enumeration.  Both are
followed by an exact containment recheck that decides the final status,
since facet directions of the unscaled template can under-constrain a
degenerate optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .goreach import GOModel, reach_go
from .goreach import build_gos as _build_gos
from .models import NarxModel, StateSpaceModel, TestSuite, UncertaintySpec
from .optim import LinearProgram, solve_lp
from .zonotope import DegenerateSetError, Zonotope, containment_scaling, to_halfspace

__all__ = [
    "ConformResult",
    "CONSTRAINT_MODES",
    "RECHECK_TOL",
    "augment_with_output_noise",
    "augment_template",
    "pad_suite_inputs",
    "build_gos",
    "size_cost_vector",
    "containment_rate",
    "identify_white",
    "identify_white_additive",
]

CONSTRAINT_MODES = ("halfspace", "generator")
RECHECK_TOL = 1e-7
# points this close to the reach-set center count as contained even when
# all scalings collapsed to zero (noise-free data)
_ABS_TOL = 1e-9


@dataclass(frozen=True)
class ConformResult:
    """Outcome of one conformance identification.

    ``status`` is "conformant" only after the recheck confirmed every
    training sample inside its reach set; "feasible" marks a solved
    problem whose recheck was skipped (inner-loop use).  ``alpha`` and
    ``cdelta`` are None when no solution exists.
    """

    status: str
    alpha: np.ndarray | None
    cdelta: np.ndarray | None
    cost: float
    containment_rate: float | None
    spec: UncertaintySpec | None
    gos: list | None = None
    n_lp_rows: int = 0
    n_lp_vars: int = 0


build_gos = _build_gos


def _weights(weights, n_k: int) -> np.ndarray:
    if weights is None:
        return np.ones(n_k)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 0:
        w = np.full(n_k, float(w))
    if w.shape != (n_k,) or np.any(w < 0):
        raise ValueError("weights must be nonnegative with one entry per step")
    return w


def size_cost_vector(gos: list, spec: UncertaintySpec, weights=None) -> np.ndarray:
    """Objective coefficients: d(weighted reach size)/d(alpha), per template column."""
    eta_x, eta_u = spec.g_x.shape[1], spec.g_u.shape[1]
    gam_x = np.zeros(eta_x)
    gam_u = np.zeros(eta_u)
    w = _weights(weights, gos[0].n_k) if gos else None
    for go in gos:
        for k in go.steps():
            if eta_x:
                gam_x += w[k] * np.abs(go.C_bar[k] @ spec.g_x).sum(axis=0)
            if eta_u:
                acc = np.zeros(eta_u)
                for i in range(k + 1):
                    acc += np.abs(go.D_bar[k][i] @ spec.g_u).sum(axis=0)
                gam_u += w[k] * acc
    return np.concatenate([gam_x, gam_u])


def _facet_normals(gen: np.ndarray) -> np.ndarray:
    """Facet directions of the unscaled template set, box directions if flat."""
    n_y = gen.shape[0]
    try:
        poly = to_halfspace(Zonotope(np.zeros(n_y), gen))
        return poly.normals
    except DegenerateSetError:
        eye = np.eye(n_y)
        return np.vstack([eye, -eye])


def _sum_dbar(go: GOModel, k: int) -> np.ndarray:
    out = np.zeros_like(go.D_bar[k][0])
    for i in range(k + 1):
        out += go.D_bar[k][i]
    return out


def _center_mask(model, spec: UncertaintySpec, center_mask) -> np.ndarray:
    n_cd = spec.c_x.shape[0] + spec.c_u.shape[0]
    if center_mask is None:
        return np.full(n_cd, bool(model.linear))
    m = np.asarray(center_mask, dtype=bool)
    if m.shape != (n_cd,):
        raise ValueError("center mask must cover the stacked (x, u) centers")
    return m


def _assemble_halfspace(gos, suite, spec, w, mask):
    eta_x, eta_u = spec.g_x.shape[1], spec.g_u.shape[1]
    n_x = spec.c_x.shape[0]
    n_alpha = eta_x + eta_u
    idx_c = np.flatnonzero(mask)
    rows_a, rows_c, rhs = [], [], []
    for go, case in zip(gos, suite.cases):
        for k in go.steps():
            blocks = []
            if eta_x:
                blocks.append(go.C_bar[k] @ spec.g_x)
            for i in range(k + 1):
                blocks.append(go.D_bar[k][i] @ spec.g_u)
            gen = np.hstack(blocks) if blocks else np.zeros((go.n_y, 0))
            N = _facet_normals(gen)
            pa = np.zeros((N.shape[0], n_alpha))
            if eta_x:
                pa[:, :eta_x] = np.abs(N @ (go.C_bar[k] @ spec.g_x))
            if eta_u:
                acc = np.zeros((N.shape[0], eta_u))
                for i in range(k + 1):
                    acc += np.abs(N @ (go.D_bar[k][i] @ spec.g_u))
                pa[:, eta_x:] = acc
            pc_full = np.hstack([
                N @ go.C_bar[k] if n_x else np.zeros((N.shape[0], 0)),
                N @ _sum_dbar(go, k),
            ])
            dev = case.samples[:, k, :] - go.y_ref[k]  # (n_s, n_y)
            rows_a.append(-pa)
            rows_c.append(-pc_full[:, idx_c])
            rhs.append(-(N @ dev.T).max(axis=1))
    a_ub = np.hstack([np.vstack(rows_a), np.vstack(rows_c)])
    b_ub = np.concatenate(rhs)
    bounds = [(0.0, None)] * n_alpha + [(None, None)] * idx_c.size
    c = np.concatenate([size_cost_vector(gos, spec, w), np.zeros(idx_c.size)])
    return LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, bounds=bounds), idx_c


def _assemble_generator(gos, suite, spec, w, mask):
    eta_x, eta_u = spec.g_x.shape[1], spec.g_u.shape[1]
    n_x = spec.c_x.shape[0]
    n_alpha = eta_x + eta_u
    idx_c = np.flatnonzero(mask)
    n_head = n_alpha + idx_c.size
    eq_r, eq_c, eq_v, b_eq = [], [], [], []
    ub_r, ub_c, ub_v = [], [], []
    col0 = n_head
    row_eq = 0
    row_ub = 0
    for go, case in zip(gos, suite.cases):
        n_s = case.samples.shape[0]
        for k in go.steps():
            blocks = []
            owners = []
            if eta_x:
                blocks.append(go.C_bar[k] @ spec.g_x)
                owners.extend(range(eta_x))
            for i in range(k + 1):
                blocks.append(go.D_bar[k][i] @ spec.g_u)
                owners.extend(range(eta_x, n_alpha))
            gen = np.hstack(blocks)
            owners = np.asarray(owners)
            n_b = gen.shape[1]
            qc_full = np.hstack([
                go.C_bar[k] if n_x else np.zeros((go.n_y, 0)),
                _sum_dbar(go, k),
            ])
            qc = qc_full[:, idx_c]
            gr, gc = np.nonzero(gen)
            qr, qcol = np.nonzero(qc)
            for s in range(n_s):
                dev = case.samples[s, k, :] - go.y_ref[k]
                # gen @ beta + qc @ cdelta = dev
                eq_r.extend(row_eq + gr); eq_c.extend(col0 + gc); eq_v.extend(gen[gr, gc])
                eq_r.extend(row_eq + qr); eq_c.extend(n_alpha + qcol); eq_v.extend(qc[qr, qcol])
                b_eq.extend(dev)
                # |beta_j| <= alpha_owner(j)
                for sign in (1.0, -1.0):
                    r = row_ub + np.arange(n_b)
                    ub_r.extend(r); ub_c.extend(col0 + np.arange(n_b)); ub_v.extend([sign] * n_b)
                    ub_r.extend(r); ub_c.extend(owners); ub_v.extend([-1.0] * n_b)
                    row_ub += n_b
                row_eq += go.n_y
                col0 += n_b
    n_vars = col0
    a_eq = sp.coo_matrix((eq_v, (eq_r, eq_c)), shape=(row_eq, n_vars)).tocsr()
    a_ub = sp.coo_matrix((ub_v, (ub_r, ub_c)), shape=(row_ub, n_vars)).tocsr()
    bounds = ([(0.0, None)] * n_alpha + [(None, None)] * idx_c.size
              + [(None, None)] * (n_vars - n_head))
    c = np.zeros(n_vars)
    c[:n_alpha] = size_cost_vector(gos, spec, w)
    lp = LinearProgram(c=c, a_ub=a_ub, b_ub=np.zeros(row_ub),
                       a_eq=a_eq, b_eq=np.asarray(b_eq), bounds=bounds)
    return lp, idx_c


def containment_rate(gos: list, suite: TestSuite, spec: UncertaintySpec,
                     tol: float = RECHECK_TOL) -> float:
    """Fraction of measured points inside their reach sets.

    A vectorized witness search (alternating projections between the
    coefficient box and the affine span) settles the bulk of the points;
    the exact containment LP only runs on the ones it cannot decide.  A
    witness may accept a point but never reject one; rejection without
    the LP happens only when the point is clearly off the generator span.
    """
    inside = 0
    total = 0
    for go, case in zip(gos, suite.cases):
        for k in go.steps():
            z = reach_go(go, spec, k)
            scale = 1.0 + np.abs(z.center).max()
            dev = case.samples[:, k, :] - z.center  # (n_s, n_y)
            total += dev.shape[0]
            quick = np.abs(dev).max(axis=1) <= _ABS_TOL * scale
            if z.order == 0:
                inside += int(np.count_nonzero(quick))
                continue
            pinv = np.linalg.pinv(z.generators)
            lam = pinv @ dev.T  # min-norm solution of G lam = dev
            span_dist = np.abs(z.generators @ lam - dev.T).max(axis=0)
            for _ in range(50):
                if np.abs(lam).max(initial=0.0) <= 1.0 + 0.5 * tol:
                    break
                boxed = np.clip(lam, -1.0, 1.0)
                lam = boxed - pinv @ (z.generators @ boxed - dev.T)
            wit_in = ((span_dist <= _ABS_TOL * scale)
                      & (np.abs(lam).max(axis=0) <= 1.0 + 0.5 * tol))
            off_span = ~quick & (span_dist > 1e2 * _ABS_TOL * scale)
            decided_in = quick | wit_in
            inside += int(np.count_nonzero(decided_in))
            for s in np.flatnonzero(~decided_in & ~off_span):
                if containment_scaling(z, case.samples[s, k, :]) <= 1.0 + tol:
                    inside += 1
    return inside / total if total else 1.0


def identify_white(model, suite: TestSuite, template: UncertaintySpec, *,
                   constraints: str = "halfspace", weights=None,
                   center_mask=None, recheck: bool = True,
                   engine: str = "auto", seed: int = 0,
                   gos: list | None = None) -> ConformResult:
    """Scale the template to conformance with minimal weighted reach size.

    ``center_mask`` restricts which stacked (x, u) center shifts are
    free; by default all are free for linear models and none otherwise.
    Pass precomputed ``gos`` to skip re-expanding the model.
    """
    if constraints not in CONSTRAINT_MODES:
        raise ValueError(f"unknown constraint mode {constraints!r}")
    if gos is None:
        gos = build_gos(model, suite, template, remainder="zero", seed=seed)
    w = _weights(weights, suite.n_k)
    mask = _center_mask(model, template, center_mask)
    assemble = _assemble_halfspace if constraints == "halfspace" else _assemble_generator
    lp, idx_c = assemble(gos, suite, template, w, mask)
    sol = solve_lp(lp, engine=engine)
    if sol.status != "optimal":
        status = "infeasible" if sol.status == "infeasible" else "solver-failure"
        return ConformResult(status=status, alpha=None, cdelta=None,
                             cost=np.inf, containment_rate=None, spec=None,
                             gos=gos, n_lp_rows=lp.n_rows, n_lp_vars=lp.n_vars)
    n_alpha = template.g_x.shape[1] + template.g_u.shape[1]
    alpha = np.maximum(sol.x[:n_alpha], 0.0)
    cdelta = np.zeros(mask.shape[0])
    cdelta[idx_c] = sol.x[n_alpha : n_alpha + idx_c.size]
    fitted = template.with_alpha(alpha, cdelta)
    cost = float(size_cost_vector(gos, template, w) @ alpha)
    if not recheck:
        return ConformResult(status="feasible", alpha=alpha, cdelta=cdelta,
                             cost=cost, containment_rate=None, spec=fitted,
                             gos=gos, n_lp_rows=lp.n_rows, n_lp_vars=lp.n_vars)
    rate = containment_rate(gos, suite, fitted)
    status = "conformant" if rate == 1.0 else "nonconformant"
    return ConformResult(status=status, alpha=alpha, cdelta=cdelta, cost=cost,
                         containment_rate=rate, spec=fitted, gos=gos,
                         n_lp_rows=lp.n_rows, n_lp_vars=lp.n_vars)


# ---------------------------------------------------------------------------
# additive-output-noise baseline


def augment_with_output_noise(model):
    """Same dynamics with an extra output-additive input block of width n_y."""
    n_y = model.n_y
    if model.kind == "statespace":
        n_u = model.n_u

        def f(x, u, p, _base=model.f):
            return _base(x, u[:n_u], p)

        def g(x, u, p, _base=model.g):
            return np.asarray(_base(x, u[:n_u], p)) + u[n_u:]

        f_jac = g_jac = None
        if model.f_jac is not None and model.g_jac is not None:
            def f_jac(x, u, p, _base=model.f_jac):
                A, B = _base(x, u[:n_u], p)
                return A, np.hstack([B, np.zeros((model.n_x, n_y))])

            def g_jac(x, u, p, _base=model.g_jac):
                C, D = _base(x, u[:n_u], p)
                return C, np.hstack([D, np.eye(n_y)])

        return StateSpaceModel(
            f=f, g=g, n_x=model.n_x, n_u=n_u + n_y, n_y=n_y,
            params=model.params, param_names=model.param_names,
            linear=model.linear, f_jac=f_jac, g_jac=g_jac,
            name=model.name + "+add")
    n_u = model.n_u

    def f(y_hist, u_hist, p, _base=model.f):
        return np.asarray(_base(y_hist, u_hist[:, :n_u], p)) + u_hist[-1, n_u:]

    f_jac = None
    if model.f_jac is not None:
        def f_jac(y_hist, u_hist, p, _base=model.f_jac):
            A_lags, B_lags = _base(y_hist, u_hist[:, :n_u], p)
            pad = [np.eye(n_y)] + [np.zeros((n_y, n_y))] * model.n_p
            return A_lags, [np.hstack([B, P]) for B, P in zip(B_lags, pad)]

    return NarxModel(
        f=f, n_p=model.n_p, n_u=n_u + n_y, n_y=n_y,
        params=model.params, param_names=model.param_names,
        linear=model.linear, f_jac=f_jac, name=model.name + "+add")


def augment_template(template: UncertaintySpec, n_y: int) -> UncertaintySpec:
    """Keep the reference centers, put the only scalable block on the extra inputs."""
    n_x, n_u = template.c_x.shape[0], template.c_u.shape[0]
    return UncertaintySpec(
        c_x=template.c_x, g_x=np.zeros((n_x, 0)),
        c_u=np.concatenate([template.c_u, np.zeros(n_y)]),
        g_u=np.vstack([np.zeros((n_u, n_y)), np.eye(n_y)]))


def pad_suite_inputs(suite: TestSuite, extra: int) -> TestSuite:
    """Widen nominal inputs with zero columns for the added block."""
    cases = [replace(c, nominal_u=np.hstack([c.nominal_u,
                                             np.zeros((c.nominal_u.shape[0], extra))]))
             for c in suite.cases]
    return TestSuite(cases=cases)


def identify_white_additive(model, suite: TestSuite, template: UncertaintySpec,
                            **kwargs) -> ConformResult:
    """Baseline that explains all deviation as additive output noise.

    The model is augmented with an extra input added to the output, the
    original uncertainty templates are dropped, and only the extra block
    is scaled (and, for linear models, shifted).  Input deviations that
    act through the dynamics must then be absorbed at the output, which
    is what makes this baseline conservative for autoregressive models.
    """
    aug = augment_with_output_noise(model)
    aug_template = augment_template(template, model.n_y)
    aug_suite = pad_suite_inputs(suite, model.n_y)
    n_cd = aug_template.c_x.shape[0] + aug_template.c_u.shape[0]
    mask = np.zeros(n_cd, dtype=bool)
    if model.linear:
        mask[n_cd - model.n_y :] = True
    kwargs.setdefault("center_mask", mask)
    return identify_white(aug, aug_suite, aug_template, **kwargs)

"""Model types, simulation, differentiation, and measurement containers.

Two model shapes are supported: discrete-time state-space models
``x_{k+1} = f(x_k, u_k, p)``, ``y_k = g(x_k, u_k, p)`` and input-output
(NARX) models ``y_k = f(y_{k-n_p..k-1}, u_{k-n_p..k}, p)``.  History
windows are passed oldest-first: ``y_hist[t]`` is ``y_{k-n_p+t}`` and
``u_hist[t]`` is ``u_{k-n_p+t}`` (so the last row of ``u_hist`` is the
current input).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .zonotope import Zonotope

__all__ = [
    "StateSpaceModel",
    "NarxModel",
    "TestCase",
    "TestSuite",
    "UncertaintySpec",
    "SimulationDivergedError",
    "simulate",
    "simulate_ss",
    "simulate_narx",
    "fd_jacobian",
    "jacobians_ss",
    "jacobians_narx",
]

FD_STEP = 1e-6


class SimulationDivergedError(RuntimeError):
    """A trajectory left the representable range (NaN/inf encountered)."""


@dataclass(frozen=True)
class StateSpaceModel:
    f: object
    g: object
    n_x: int
    n_u: int
    n_y: int
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    param_names: tuple = ()
    linear: bool = False
    f_jac: object = None
    g_jac: object = None
    hess_bound_f: object = None
    hess_bound_g: object = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))

    @property
    def kind(self) -> str:
        return "statespace"

    def with_params(self, p) -> "StateSpaceModel":
        return dataclasses.replace(self, params=np.asarray(p, dtype=float))

    def step(self, x, u):
        return np.asarray(self.f(x, u, self.params), dtype=float)

    def output(self, x, u):
        return np.asarray(self.g(x, u, self.params), dtype=float)


@dataclass(frozen=True)
class NarxModel:
    f: object
    n_p: int
    n_u: int
    n_y: int
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    param_names: tuple = ()
    linear: bool = False
    f_jac: object = None
    hess_bound_f: object = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))
        if self.n_p < 1:
            raise ValueError("NARX order n_p must be >= 1")

    @property
    def kind(self) -> str:
        return "narx"

    @property
    def n_lift(self) -> int:
        """Dimension of the stacked-window state."""
        return self.n_p * self.n_y

    def with_params(self, p) -> "NarxModel":
        return dataclasses.replace(self, params=np.asarray(p, dtype=float))

    def step(self, y_hist, u_hist):
        return np.asarray(self.f(y_hist, u_hist, self.params), dtype=float)


# ---------------------------------------------------------------------------
# simulation


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise SimulationDivergedError(f"{what} became non-finite")


def simulate_ss(model: StateSpaceModel, x0, u_seq, return_states: bool = False):
    """Outputs y_0..y_{n_k-1} for inputs u_0..u_{n_k-1} from initial state x0."""
    x = np.asarray(x0, dtype=float)
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    n_k = u_seq.shape[0]
    if u_seq.shape[1] != model.n_u:
        raise ValueError(f"inputs have width {u_seq.shape[1]}, model expects {model.n_u}")
    if x.shape != (model.n_x,):
        raise ValueError(f"x0 has shape {x.shape}, model expects ({model.n_x},)")
    ys = np.empty((n_k, model.n_y))
    xs = np.empty((n_k, model.n_x))
    for k in range(n_k):
        xs[k] = x
        ys[k] = model.output(x, u_seq[k])
        if k < n_k - 1:
            x = model.step(x, u_seq[k])
            _check_finite(x, f"state at step {k + 1}")
    _check_finite(ys, "outputs")
    return (xs, ys) if return_states else ys


def simulate_narx(model: NarxModel, y_init, u_seq) -> np.ndarray:
    """Outputs y_0..y_{n_k-1}; the first n_p rows are the given window."""
    y_init = np.atleast_2d(np.asarray(y_init, dtype=float))
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    n_p = model.n_p
    if y_init.shape != (n_p, model.n_y):
        raise ValueError(f"initial window must be ({n_p}, {model.n_y}), got {y_init.shape}")
    if u_seq.shape[1] != model.n_u:
        raise ValueError(f"inputs have width {u_seq.shape[1]}, model expects {model.n_u}")
    n_k = u_seq.shape[0]
    if n_k < n_p:
        raise ValueError("need at least n_p input steps")
    ys = np.empty((n_k, model.n_y))
    ys[:n_p] = y_init
    for k in range(n_p, n_k):
        y_hist = ys[k - n_p : k]
        u_hist = u_seq[k - n_p : k + 1]
        ys[k] = model.step(y_hist, u_hist)
        _check_finite(ys[k], f"output at step {k}")
    return ys


def simulate(model, init, u_seq):
    if model.kind == "statespace":
        return simulate_ss(model, init, u_seq)
    return simulate_narx(model, init, u_seq)


# ---------------------------------------------------------------------------
# differentiation


def fd_jacobian(fun, x) -> np.ndarray:
    """Central differences with per-coordinate step 1e-6 * (1 + |x_i|)."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    J = np.empty((f0.shape[0], x.shape[0]))
    for i in range(x.shape[0]):
        h = FD_STEP * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(fun(xp), dtype=float) - np.asarray(fun(xm), dtype=float)) / (2.0 * h)
    return J


def jacobians_ss(model: StateSpaceModel, x, u):
    """(A, B, C, D) at the given point; analytic callables win over differences."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    p = model.params
    if model.f_jac is not None:
        A, B = model.f_jac(x, u, p)
        A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    else:
        A = fd_jacobian(lambda xx: model.f(xx, u, p), x)
        B = fd_jacobian(lambda uu: model.f(x, uu, p), u)
    if model.g_jac is not None:
        C, D = model.g_jac(x, u, p)
        C, D = np.asarray(C, dtype=float), np.asarray(D, dtype=float)
    else:
        C = fd_jacobian(lambda xx: model.g(xx, u, p), x)
        D = fd_jacobian(lambda uu: model.g(x, uu, p), u)
    return A, B, C, D


def jacobians_narx(model: NarxModel, y_hist, u_hist):
    """Window Jacobians (A_by_lag, B_by_lag).

    ``A_by_lag[i-1]`` is the derivative w.r.t. y_{k-i} for lag i = 1..n_p;
    ``B_by_lag[i]`` w.r.t. u_{k-i} for lag i = 0..n_p.
    """
    y_hist = np.asarray(y_hist, dtype=float)
    u_hist = np.asarray(u_hist, dtype=float)
    p = model.params
    n_p, n_y, n_u = model.n_p, model.n_y, model.n_u
    if model.f_jac is not None:
        A_by_lag, B_by_lag = model.f_jac(y_hist, u_hist, p)
        return ([np.asarray(a, dtype=float) for a in A_by_lag],
                [np.asarray(b, dtype=float) for b in B_by_lag])

    def flat_fun(z):
        yh = z[: n_p * n_y].reshape(n_p, n_y)
        uh = z[n_p * n_y :].reshape(n_p + 1, n_u)
        return model.f(yh, uh, p)

    z0 = np.concatenate([y_hist.ravel(), u_hist.ravel()])
    J = fd_jacobian(flat_fun, z0)
    A_by_lag = []
    for lag in range(1, n_p + 1):
        t = n_p - lag
        A_by_lag.append(J[:, t * n_y : (t + 1) * n_y])
    off = n_p * n_y
    B_by_lag = []
    for lag in range(0, n_p + 1):
        t = n_p - lag
        B_by_lag.append(J[:, off + t * n_u : off + (t + 1) * n_u])
    return A_by_lag, B_by_lag


# ---------------------------------------------------------------------------
# measurement containers


@dataclass(frozen=True)
class TestCase:
    """One nominal scenario with repeated measured output trajectories.

    ``nominal_x0`` is None for input-output data.  ``nominal_u`` has shape
    (n_k, n_u) and ``samples`` (n_s, n_k, n_y).
    """

    __test__ = False  # keep pytest from collecting this as a test class

    nominal_u: np.ndarray
    samples: np.ndarray
    nominal_x0: np.ndarray | None = None

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.nominal_u, dtype=float))
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 3:
            raise ValueError(f"samples must be (n_s, n_k, n_y), got shape {s.shape}")
        if s.shape[1] != u.shape[0]:
            raise ValueError("samples and nominal_u disagree on trajectory length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(s))):
            raise ValueError("test case contains non-finite values")
        object.__setattr__(self, "nominal_u", u)
        object.__setattr__(self, "samples", s)
        if self.nominal_x0 is not None:
            x0 = np.asarray(self.nominal_x0, dtype=float)
            if x0.ndim != 1 or not np.all(np.isfinite(x0)):
                raise ValueError("nominal_x0 must be a finite vector")
            object.__setattr__(self, "nominal_x0", x0)

    @property
    def n_s(self) -> int:
        return self.samples.shape[0]

    @property
    def n_k(self) -> int:
        return self.samples.shape[1]

    @property
    def n_y(self) -> int:
        return self.samples.shape[2]

    def initial_window(self, n_p: int) -> np.ndarray:
        """Mean over samples of the first n_p measurements (NARX reference window)."""
        if self.n_k < n_p:
            raise ValueError("trajectory shorter than the model order")
        return self.samples[:, :n_p, :].mean(axis=0)


@dataclass(frozen=True)
class TestSuite:
    __test__ = False  # keep pytest from collecting this as a test class

    cases: tuple

    def __post_init__(self):
        cases = tuple(self.cases)
        if not cases:
            raise ValueError("test suite is empty")
        n_k, n_y, n_u = cases[0].n_k, cases[0].n_y, cases[0].nominal_u.shape[1]
        for c in cases:
            if (c.n_k, c.n_y, c.nominal_u.shape[1]) != (n_k, n_y, n_u):
                raise ValueError("all cases must share n_k, n_y and input width")
        object.__setattr__(self, "cases", cases)

    @property
    def n_m(self) -> int:
        return len(self.cases)

    @property
    def n_k(self) -> int:
        return self.cases[0].n_k

    @property
    def n_y(self) -> int:
        return self.cases[0].n_y

    @property
    def n_u(self) -> int:
        return self.cases[0].nominal_u.shape[1]

    def subset(self, idx) -> "TestSuite":
        return TestSuite(tuple(self.cases[i] for i in idx))


# ---------------------------------------------------------------------------
# uncertainty templates


@dataclass(frozen=True)
class UncertaintySpec:
    """Scalable zonotopic uncertainty: X0 = <c_x + cdelta_x, G_x diag(alpha_x)>
    and the time-invariant per-step input set U = <c_u + cdelta_u, G_u diag(alpha_u)>.

    Input-output models carry an empty x-part (their initial window is
    measured, not uncertain).
    """

    c_x: np.ndarray
    g_x: np.ndarray
    c_u: np.ndarray
    g_u: np.ndarray
    alpha_x: np.ndarray = None
    alpha_u: np.ndarray = None
    cdelta_x: np.ndarray = None
    cdelta_u: np.ndarray = None

    def __post_init__(self):
        c_x = np.asarray(self.c_x, dtype=float)
        c_u = np.asarray(self.c_u, dtype=float)
        g_x = np.asarray(self.g_x, dtype=float)
        g_u = np.asarray(self.g_u, dtype=float)
        # reshape(-1) is ambiguous for empty x-parts of input-output specs
        g_x = g_x.reshape(0, 0) if c_x.size == 0 else g_x.reshape(c_x.shape[0], -1)
        g_u = g_u.reshape(0, 0) if c_u.size == 0 else g_u.reshape(c_u.shape[0], -1)
        object.__setattr__(self, "c_x", c_x)
        object.__setattr__(self, "c_u", c_u)
        object.__setattr__(self, "g_x", g_x)
        object.__setattr__(self, "g_u", g_u)
        for name, size in (("alpha_x", g_x.shape[1]), ("alpha_u", g_u.shape[1]),
                           ("cdelta_x", c_x.shape[0]), ("cdelta_u", c_u.shape[0])):
            val = getattr(self, name)
            if val is None:
                val = np.ones(size) if name.startswith("alpha") else np.zeros(size)
            val = np.asarray(val, dtype=float)
            if val.shape != (size,):
                raise ValueError(f"{name} must have shape ({size},)")
            object.__setattr__(self, name, val)
        if np.any(self.alpha_x < 0) or np.any(self.alpha_u < 0):
            raise ValueError("scaling factors must be nonnegative")

    @classmethod
    def for_io(cls, c_u, g_u, **kw) -> "UncertaintySpec":
        return cls(c_x=np.zeros(0), g_x=np.zeros((0, 0)), c_u=c_u, g_u=g_u, **kw)

    @property
    def eta_x(self) -> int:
        return self.g_x.shape[1]

    @property
    def eta_u(self) -> int:
        return self.g_u.shape[1]

    @property
    def alpha(self) -> np.ndarray:
        return np.concatenate([self.alpha_x, self.alpha_u])

    @property
    def cdelta(self) -> np.ndarray:
        return np.concatenate([self.cdelta_x, self.cdelta_u])

    def x0_set(self) -> Zonotope:
        return Zonotope(self.c_x + self.cdelta_x, self.g_x * self.alpha_x)

    def u_set(self) -> Zonotope:
        return Zonotope(self.c_u + self.cdelta_u, self.g_u * self.alpha_u)

    def x0_deviation_set(self) -> Zonotope:
        """X0 shifted by -c_x; what the reach-set construction actually adds."""
        return Zonotope(self.cdelta_x, self.g_x * self.alpha_x)

    def u_deviation_set(self) -> Zonotope:
        return Zonotope(self.cdelta_u, self.g_u * self.alpha_u)

    def with_alpha(self, alpha, cdelta=None) -> "UncertaintySpec":
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.eta_x + self.eta_u,):
            raise ValueError("alpha has wrong length")
        kw = dict(alpha_x=alpha[: self.eta_x], alpha_u=alpha[self.eta_x :])
        if cdelta is not None:
            cdelta = np.asarray(cdelta, dtype=float)
            n_x = self.c_x.shape[0]
            kw.update(cdelta_x=cdelta[:n_x], cdelta_u=cdelta[n_x:])
        return dataclasses.replace(self, **kw)

    def scaled(self, eps: float) -> "UncertaintySpec":
        """Inflate all identified scalings by a factor eps >= 0."""
        if eps < 0:
            raise ValueError("scale factor must be nonnegative")
        return dataclasses.replace(self, alpha_x=self.alpha_x * eps,
                                   alpha_u=self.alpha_u * eps)

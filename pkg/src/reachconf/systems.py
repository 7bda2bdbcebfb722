"""Benchmark system catalog.

Euler discretization is used for the continuous-time systems; default
step sizes: 0.1 for the tank chain, 0.01 for the chaotic attractor and
the vehicle.  Each constructor returns an immutable model carrying its
parameter vector, analytic Jacobians where cheap, and (for the systems
used in remainder tests) analytic bounds on second derivatives.
"""

from __future__ import annotations

import warnings

import numpy as np

from .intervals import Interval
from .models import NarxModel, StateSpaceModel

__all__ = [
    "water_tanks",
    "pedestrian_ss",
    "pedestrian_arx",
    "lorenz",
    "narx1",
    "kinematic_vehicle",
    "make_system",
    "SYSTEM_IDS",
    "ClampWarning",
]


class ClampWarning(UserWarning):
    """A square-root argument was clamped at zero during simulation."""


def _linear_ss(mats, n_x, n_u, n_y, params, param_names, name):
    # matrices are derived from the parameter argument on every call so
    # that with_params(p) changes the dynamics, not just the stored vector

    def f(x, u, p):
        A, B, _, _ = mats(p)
        return A @ x + B @ u

    def g(x, u, p):
        _, _, C, D = mats(p)
        return C @ x + D @ u

    def f_jac(x, u, p):
        A, B, _, _ = mats(p)
        return A, B

    def g_jac(x, u, p):
        _, _, C, D = mats(p)
        return C, D

    return StateSpaceModel(
        f=f, g=g, n_x=n_x, n_u=n_u, n_y=n_y,
        params=params, param_names=param_names, linear=True,
        f_jac=f_jac, g_jac=g_jac, name=name,
    )


def pedestrian_ss(p=None) -> StateSpaceModel:
    """Planar pedestrian: position/velocity double integrator with direct
    position measurement; inputs are two accelerations plus two output
    disturbances."""
    p = np.asarray([1.0, 0.01, 5e-5, 0.01] if p is None else p, dtype=float)

    def mats(pp):
        p1, p2, p3, p4 = pp
        A = np.array([[p1, 0, p2, 0], [0, p1, 0, p2], [0, 0, p1, 0], [0, 0, 0, p1]])
        B = np.array([[p3, 0, 0, 0], [0, p3, 0, 0], [p4, 0, 0, 0], [0, p4, 0, 0]])
        C = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        D = np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0]])
        return A, B, C, D

    return _linear_ss(mats, 4, 4, 2, p, ("p1", "p2", "p3", "p4"), "pedestrian_ss")


def _pedestrian_arx_mats(pp):
    p1, p2, p3, p4 = pp
    A1 = np.diag([p1, p1])
    A2 = np.diag([p2, p2])
    B0 = np.array([[0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)
    B1 = np.array([[p3, 0, p4, 0], [0, p3, 0, p4]])
    B2 = np.array([[p3, 0, 1, 0], [0, p3, 0, 1]])
    return [A1, A2], [B0, B1, B2]


def pedestrian_arx(p=None) -> NarxModel:
    """Second-order ARX variant of the pedestrian model (two output lags,
    three input lags)."""
    p = np.asarray([2.0, -2.0, 5e-5, -1.0] if p is None else p, dtype=float)

    def f(y_hist, u_hist, pp):
        # windows are oldest-first: y_hist[-1] = y_{k-1}, u_hist[-1] = u_k
        [A1, A2], [B0, B1, B2] = _pedestrian_arx_mats(pp)
        return (A1 @ y_hist[-1] + A2 @ y_hist[-2]
                + B0 @ u_hist[-1] + B1 @ u_hist[-2] + B2 @ u_hist[-3])

    def f_jac(yh, uh, pp):
        return _pedestrian_arx_mats(pp)

    return NarxModel(
        f=f, n_p=2, n_u=4, n_y=2, params=p,
        param_names=("p1", "p2", "p3", "p4"), linear=True,
        f_jac=f_jac, name="pedestrian_arx",
    )


def water_tanks(n_tanks: int = 3, dt: float = 0.1) -> StateSpaceModel:
    """Chain of tanks with Torricelli outflow; inflow only at every third
    tank (1, 4, 7, ...), each level measured directly.

    Square-root arguments are clamped at zero; a ClampWarning is emitted
    when that happens so callers can detect trajectories leaving the
    physical regime.
    """
    if n_tanks < 1:
        raise ValueError("need at least one tank")
    inflow = [i for i in range(n_tanks) if i % 3 == 0]
    n_u = len(inflow)
    u_map = np.zeros((n_tanks, n_u))
    for j, i in enumerate(inflow):
        u_map[i, j] = 1.0

    def _sqrt(x):
        if np.any(x < 0):
            warnings.warn("tank level below zero, square root clamped", ClampWarning)
        return np.sqrt(np.maximum(x, 0.0))

    def f(x, u, p):
        s = _sqrt(x)
        flow = np.empty_like(s)
        flow[0] = -0.3 * s[0]
        flow[1:] = 0.3 * (s[:-1] - s[1:])
        return x + dt * (u_map @ u + flow)

    def g(x, u, p):
        return x.copy()

    def f_jac(x, u, p):
        # derivative of the clamped sqrt is zero below the clamp
        d = np.where(x > 0, 0.15 / np.sqrt(np.maximum(x, 1e-300)), 0.0)
        A = np.eye(n_tanks) + dt * (np.diag(-d) + np.diag(d[:-1], -1))
        return A, dt * u_map

    def g_jac(x, u, p):
        return np.eye(n_tanks), np.zeros((n_tanks, n_u))

    def hess_bound_f(x_lo, x_hi, u_lo, u_hi, p):
        # d2/dx2 of 0.3*sqrt(x) is -0.075 x^(-3/2); unbounded at the clamp
        n_z = n_tanks + n_u
        H = np.zeros((n_tanks, n_z, n_z))
        curv = np.where(x_lo > 0, 0.075 * dt / np.maximum(x_lo, 1e-300) ** 1.5, np.inf)
        for i in range(n_tanks):
            H[i, i, i] = curv[i]
            if i + 1 < n_tanks:
                H[i + 1, i, i] = max(H[i + 1, i, i], curv[i])
        return H

    def hess_bound_g(x_lo, x_hi, u_lo, u_hi, p):
        return np.zeros((n_tanks, n_tanks + n_u, n_tanks + n_u))

    return StateSpaceModel(
        f=f, g=g, n_x=n_tanks, n_u=n_u, n_y=n_tanks, params=np.zeros(0),
        linear=False, f_jac=f_jac, g_jac=g_jac,
        hess_bound_f=hess_bound_f, hess_bound_g=hess_bound_g,
        name=f"water_tanks_{n_tanks}",
    )


def lorenz(p=None, dt: float = 0.01) -> StateSpaceModel:
    """Euler-discretized chaotic attractor; the three rate coefficients are
    perturbed by the inputs, the first two states are measured."""
    p = np.asarray([10.0, 28.0, 8.0 / 3.0] if p is None else p, dtype=float)

    def f(x, u, pp):
        s, r, b = pp
        dx = np.array([
            (s + u[0]) * (x[1] - x[0]),
            (r + u[1]) * x[0] - x[1] - x[0] * x[2],
            x[0] * x[1] - (b + u[2]) * x[2],
        ])
        return x + dt * dx

    C = np.array([[1.0, 0, 0], [0, 1.0, 0]])

    def g(x, u, pp):
        return C @ x

    def f_jac(x, u, pp):
        s, r, b = pp
        J = np.array([
            [-(s + u[0]), (s + u[0]), 0.0],
            [(r + u[1]) - x[2], -1.0, -x[0]],
            [x[1], x[0], -(b + u[2])],
        ])
        Ju = np.array([
            [x[1] - x[0], 0.0, 0.0],
            [0.0, x[0], 0.0],
            [0.0, 0.0, -x[2]],
        ])
        return np.eye(3) + dt * J, dt * Ju

    def g_jac(x, u, pp):
        return C, np.zeros((2, 3))

    def hess_bound_f(x_lo, x_hi, u_lo, u_hi, pp):
        # all second derivatives are constant (+-dt on bilinear terms)
        H = np.zeros((3, 6, 6))
        for (out, a, b_) in [(0, 3, 1), (0, 3, 0),        # u1*(x2 - x1)
                             (1, 4, 0), (1, 0, 2),        # u2*x1, -x1*x3
                             (2, 0, 1), (2, 5, 2)]:       # x1*x2, -u3*x3
            H[out, a, b_] = dt
            H[out, b_, a] = dt
        return H

    def hess_bound_g(x_lo, x_hi, u_lo, u_hi, pp):
        return np.zeros((2, 6, 6))

    return StateSpaceModel(
        f=f, g=g, n_x=3, n_u=3, n_y=2, params=p,
        param_names=("sigma", "rho", "beta"), linear=False,
        f_jac=f_jac, g_jac=g_jac,
        hess_bound_f=hess_bound_f, hess_bound_g=hess_bound_g,
        name="lorenz",
    )


def narx1(p=None) -> NarxModel:
    """Two-output rational NARX benchmark with one output lag and two
    input lags feeding different channels."""
    p = np.asarray([0.8, 1.2] if p is None else p, dtype=float)

    def f(y_hist, u_hist, pp):
        y1, y2 = y_hist[-1]
        den = 1.0 + y2 * y2
        return np.array([
            y1 / den + pp[0] * u_hist[-2][0],
            y1 * y2 / den + pp[1] * u_hist[-3][1],
        ])

    def f_jac(y_hist, u_hist, pp):
        y1, y2 = y_hist[-1]
        den = 1.0 + y2 * y2
        A1 = np.array([
            [1.0 / den, -2.0 * y1 * y2 / den ** 2],
            [y2 / den, y1 * (1.0 - y2 * y2) / den ** 2],
        ])
        A2 = np.zeros((2, 2))
        B0 = np.zeros((2, 2))
        B1 = np.array([[pp[0], 0.0], [0.0, 0.0]])
        B2 = np.array([[0.0, 0.0], [0.0, pp[1]]])
        return [A1, A2], [B0, B1, B2]

    def hess_bound_f(z_lo, z_hi, pp):
        # z stacks [y_hist.ravel(), u_hist.ravel()]; only y_{k-1} curves
        n_z = z_lo.shape[0]
        i1, i2 = 2, 3  # y_{k-1} components within the flattened window
        y1 = Interval(z_lo[i1], z_hi[i1])
        y2 = Interval(z_lo[i2], z_hi[i2])
        den = y2.square() + 1.0
        h1_12 = (-2.0 * y2) / den.square()
        h1_22 = y1 * (6.0 * y2.square() - 2.0) / den.cube()
        h2_12 = (1.0 - y2.square()) / den.square()
        h2_22 = y1 * (2.0 * y2.cube() - 6.0 * y2) / den.cube()
        H = np.zeros((2, n_z, n_z))
        H[0, i1, i2] = H[0, i2, i1] = h1_12.absmax()
        H[0, i2, i2] = h1_22.absmax()
        H[1, i1, i2] = H[1, i2, i1] = h2_12.absmax()
        H[1, i2, i2] = h2_22.absmax()
        return H

    return NarxModel(
        f=f, n_p=2, n_u=2, n_y=2, params=p, param_names=("p1", "p2"),
        linear=False, f_jac=f_jac, hess_bound_f=hess_bound_f, name="narx1",
    )


def kinematic_vehicle(p=None, dt: float = 0.01) -> StateSpaceModel:
    """Single-track kinematic vehicle with steering-wheel input.

    States: x/y position, steering wheel angle, speed, heading.  Inputs:
    steering wheel rate, longitudinal acceleration, five process
    disturbances and four measurement disturbances.  Outputs: positions,
    steering wheel angle, speed.  Parameters: steering ratio, wheelbase,
    rear-axle distance.
    """
    p = np.asarray([1.0 / 15.4, 3.128, 1.484] if p is None else p, dtype=float)

    def f(x, u, pp):
        r_delta, length, l_r = pp
        beta = np.arctan(np.tan(x[2]) * l_r / length)
        dx = np.array([
            x[3] * np.cos(beta + x[4]),
            x[3] * np.sin(beta + x[4]),
            r_delta * u[0],
            u[1],
            x[3] * np.cos(beta) * np.tan(x[2]) / length,
        ])
        return x + dt * (dx + u[2:7])

    def g(x, u, pp):
        r_delta = pp[0]
        return np.array([x[0], x[1], x[2] / r_delta, x[3]]) + u[7:11]

    return StateSpaceModel(
        f=f, g=g, n_x=5, n_u=11, n_y=4, params=p,
        param_names=("r_delta", "length", "l_r"), linear=False,
        name="kinematic_vehicle",
    )


SYSTEM_IDS = {
    "pedestrian_ss": pedestrian_ss,
    "pedestrian_arx": pedestrian_arx,
    "lorenz": lorenz,
    "narx1": narx1,
    "water_tanks": water_tanks,
    "kinematic_vehicle": kinematic_vehicle,
}


def make_system(system_id: str, **kwargs):
    """Instantiate a catalog system by identifier (see SYSTEM_IDS)."""
    try:
        ctor = SYSTEM_IDS[system_id]
    except KeyError:
        raise KeyError(
            f"unknown system {system_id!r}; known: {sorted(SYSTEM_IDS)}"
        ) from None
    return ctor(**kwargs)

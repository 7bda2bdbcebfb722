"""Seeded construction of ground-truth uncertainty and measurement suites.

Sampling conventions: nominal inputs are uniform on [-1, 1] per channel
and step, set samples use uniform zonotope coefficients, and every case
is produced by a generator seeded with (seed, case index, attempt), so
regeneration after a diverged trajectory stays reproducible.
"""

from __future__ import annotations

import numpy as np

from ..models import (
    NarxModel,
    SimulationDivergedError,
    TestCase,
    TestSuite,
    UncertaintySpec,
    simulate_narx,
    simulate_ss,
)

__all__ = ["random_true_spec", "generate_suite", "identification_template"]

MAX_CASE_RETRIES = 20


def random_true_spec(model, seed: int, center_range: float = 1.0,
                     radius: float = 0.25) -> UncertaintySpec:
    """Ground-truth sets: uniform centers, random diagonal generators.

    Diagonal entries are uniform on [-radius, radius]; their sign has no
    effect on the set itself.
    """
    rng = np.random.default_rng(seed)
    c_u = rng.uniform(-center_range, center_range, model.n_u)
    g_u = np.diag(rng.uniform(-radius, radius, model.n_u))
    if isinstance(model, NarxModel):
        return UncertaintySpec.for_io(c_u=c_u, g_u=g_u)
    c_x = rng.uniform(-center_range, center_range, model.n_x)
    g_x = np.diag(rng.uniform(-radius, radius, model.n_x))
    return UncertaintySpec(c_x=c_x, g_x=g_x, c_u=c_u, g_u=g_u)


def identification_template(true_spec: UncertaintySpec,
                            known_centers: bool = True) -> UncertaintySpec:
    """What the identification methods are given: identity generator
    matrices whose columns must be rescaled to fit the data.

    With ``known_centers`` the template keeps the true center vectors;
    otherwise they are blanked out and center recovery is part of the
    identification problem (linear programs recover them exactly for
    linear models, nonlinear models need them in the search variables).
    """
    g_x = np.eye(true_spec.c_x.shape[0])
    g_u = np.eye(true_spec.c_u.shape[0])
    if known_centers:
        return UncertaintySpec(c_x=true_spec.c_x.copy(), g_x=g_x,
                               c_u=true_spec.c_u.copy(), g_u=g_u)
    return UncertaintySpec(c_x=np.zeros_like(true_spec.c_x), g_x=g_x,
                           c_u=np.zeros_like(true_spec.c_u), g_u=g_u)


def _sample_set(z, rng) -> np.ndarray:
    # extreme excitation: coefficients at the vertices, not the interior.
    # interior draws of summed per-step sets almost never co-extremize,
    # which deflates the fitted scalings well below the true sets
    return z.center + z.generators @ (2.0 * rng.integers(0, 2, z.order) - 1.0)


def _one_case(model, spec: UncertaintySpec, n_k: int, n_s: int, rng,
              x0_range) -> TestCase:
    nominal_u = rng.uniform(-1.0, 1.0, (n_k, model.n_u))
    zu = spec.u_set()
    if isinstance(model, NarxModel):
        window = rng.uniform(-1.0, 1.0, (model.n_p, model.n_y))
        samples = []
        for _ in range(n_s):
            u = nominal_u + np.stack([_sample_set(zu, rng) for _ in range(n_k)])
            samples.append(simulate_narx(model, window, u))
        return TestCase(nominal_u=nominal_u, samples=np.asarray(samples))
    lo, hi = x0_range
    nominal_x0 = rng.uniform(lo, hi, model.n_x)
    zx = spec.x0_set()
    samples = []
    for _ in range(n_s):
        x0 = nominal_x0 + _sample_set(zx, rng)
        u = nominal_u + np.stack([_sample_set(zu, rng) for _ in range(n_k)])
        samples.append(simulate_ss(model, x0, u))
    return TestCase(nominal_u=nominal_u, samples=np.asarray(samples),
                    nominal_x0=nominal_x0)


def generate_suite(model, spec: UncertaintySpec, n_m: int, n_k: int, n_s: int,
                   seed: int, x0_range=(-1.0, 1.0)) -> TestSuite:
    """Measurement suite from the true model under the true sets.

    ``x0_range`` bounds the nominal initial states; systems with a
    restricted physical domain (tank levels) pass a positive range.
    """
    if min(n_m, n_k, n_s) < 1:
        raise ValueError("n_m, n_k and n_s must all be at least 1")
    cases = []
    for m in range(n_m):
        for attempt in range(MAX_CASE_RETRIES):
            rng = np.random.default_rng((seed, m, attempt))
            try:
                cases.append(_one_case(model, spec, n_k, n_s, rng, x0_range))
                break
            except SimulationDivergedError:
                continue
        else:
            raise SimulationDivergedError(
                f"case {m} diverged {MAX_CASE_RETRIES} times in a row")
    return TestSuite(tuple(cases))

"""Seeded suite construction: determinism, vertex excitation, retries."""

import numpy as np
import pytest

from reachconf.harness.generate import (
    generate_suite,
    identification_template,
    random_true_spec,
)
from reachconf.models import (
    NarxModel,
    SimulationDivergedError,
    StateSpaceModel,
    UncertaintySpec,
)
from reachconf.systems import pedestrian_ss


def passthrough_narx(n: int = 1) -> NarxModel:
    # y_k = u_k, so measured deviations expose the raw input-set draws
    return NarxModel(f=lambda yh, uh, p: uh[-1], n_p=1, n_u=n, n_y=n, linear=True)


def test_same_seed_same_suite():
    model = pedestrian_ss()
    spec = random_true_spec(model, seed=5)
    a = generate_suite(model, spec, 3, 6, 4, seed=11)
    b = generate_suite(model, spec, 3, 6, 4, seed=11)
    assert a.n_m == b.n_m == 3
    for ca, cb in zip(a.cases, b.cases):
        np.testing.assert_array_equal(ca.samples, cb.samples)
        np.testing.assert_array_equal(ca.nominal_u, cb.nominal_u)
        np.testing.assert_array_equal(ca.nominal_x0, cb.nominal_x0)


def test_seed_changes_data():
    model = pedestrian_ss()
    spec = random_true_spec(model, seed=5)
    a = generate_suite(model, spec, 2, 6, 3, seed=1)
    b = generate_suite(model, spec, 2, 6, 3, seed=2)
    assert not np.array_equal(a.cases[0].samples, b.cases[0].samples)


def test_random_true_spec_diagonal_and_bounded():
    model = pedestrian_ss()
    s1 = random_true_spec(model, seed=3, radius=0.4)
    s2 = random_true_spec(model, seed=3, radius=0.4)
    np.testing.assert_array_equal(s1.c_u, s2.c_u)
    np.testing.assert_array_equal(s1.g_x, s2.g_x)
    assert s1.g_x.shape == (4, 4)
    np.testing.assert_array_equal(s1.g_u - np.diag(np.diag(s1.g_u)), 0.0)
    assert np.all(np.abs(np.diag(s1.g_u)) <= 0.4)
    assert np.all(np.abs(s1.c_u) <= 1.0)


def test_io_true_spec_has_empty_x_part():
    spec = random_true_spec(passthrough_narx(), seed=0)
    assert spec.c_x.size == 0 and spec.eta_x == 0


def test_samples_sit_at_input_set_vertices():
    model = passthrough_narx(2)
    spec = UncertaintySpec.for_io(c_u=np.array([0.3, -0.1]),
                                  g_u=np.diag([0.2, 0.05]))
    suite = generate_suite(model, spec, 2, 8, 5, seed=7)
    for case in suite.cases:
        dev = case.samples[:, 1:, :] - spec.c_u - case.nominal_u[None, 1:, :]
        np.testing.assert_allclose(np.abs(dev[..., 0]), 0.2, atol=1e-12)
        np.testing.assert_allclose(np.abs(dev[..., 1]), 0.05, atol=1e-12)


def test_narx_samples_share_one_window_per_case():
    model = passthrough_narx()
    spec = UncertaintySpec.for_io(c_u=np.zeros(1), g_u=np.eye(1))
    suite = generate_suite(model, spec, 3, 6, 4, seed=2)
    for case in suite.cases:
        first = case.samples[:, 0, :]
        np.testing.assert_array_equal(first, np.tile(first[0], (4, 1)))
        assert case.nominal_x0 is None


def test_identification_template_keeps_or_blanks_centers():
    true = UncertaintySpec(c_x=[0.5, -1.0], g_x=np.diag([0.2, 0.3]),
                           c_u=[2.0], g_u=[[0.1]])
    known = identification_template(true, known_centers=True)
    np.testing.assert_array_equal(known.c_x, [0.5, -1.0])
    np.testing.assert_array_equal(known.c_u, [2.0])
    np.testing.assert_array_equal(known.g_x, np.eye(2))
    np.testing.assert_array_equal(known.g_u, np.eye(1))
    blank = identification_template(true, known_centers=False)
    np.testing.assert_array_equal(blank.c_x, 0.0)
    np.testing.assert_array_equal(blank.c_u, 0.0)


def sign_sensitive_model() -> StateSpaceModel:
    # diverges whenever the initial state is positive
    def g(x, u, p):
        return u + (np.inf if x[0] > 0 else 0.0)

    return StateSpaceModel(f=lambda x, u, p: x, g=g, n_x=1, n_u=1, n_y=1)


def point_spec() -> UncertaintySpec:
    return UncertaintySpec(c_x=np.zeros(1), g_x=np.zeros((1, 1)),
                           c_u=np.zeros(1), g_u=np.zeros((1, 1)))


def test_retries_skip_diverging_draws():
    suite = generate_suite(sign_sensitive_model(), point_spec(), 4, 3, 2, seed=13)
    for case in suite.cases:
        assert case.nominal_x0[0] <= 0
    again = generate_suite(sign_sensitive_model(), point_spec(), 4, 3, 2, seed=13)
    for ca, cb in zip(suite.cases, again.cases):
        np.testing.assert_array_equal(ca.samples, cb.samples)


def test_hopeless_divergence_raises():
    model = StateSpaceModel(f=lambda x, u, p: x,
                            g=lambda x, u, p: u + np.inf,
                            n_x=1, n_u=1, n_y=1)
    with pytest.raises(SimulationDivergedError, match="diverged 20 times"):
        generate_suite(model, point_spec(), 1, 3, 1, seed=0)


def test_sizes_must_be_positive():
    model = passthrough_narx()
    spec = UncertaintySpec.for_io(c_u=np.zeros(1), g_u=np.eye(1))
    with pytest.raises(ValueError, match="at least 1"):
        generate_suite(model, spec, 0, 3, 1, seed=0)


def test_x0_range_bounds_nominal_states():
    model = pedestrian_ss()
    spec = random_true_spec(model, seed=1)
    suite = generate_suite(model, spec, 5, 4, 1, seed=3, x0_range=(1.0, 2.0))
    for case in suite.cases:
        assert np.all(case.nominal_x0 >= 1.0) and np.all(case.nominal_x0 <= 2.0)

"""Estimator API: params round-trip, fit attributes, prediction, scoring."""

import numpy as np
import pytest
from sklearn.base import clone

from reachconf.blackbox import GeneModel, GPConfig, model_from_text, model_to_text
from reachconf.estimators import (
    BlackBoxIdentifier,
    GrayBoxIdentifier,
    WhiteBoxIdentifier,
)
from reachconf.harness.generate import generate_suite
from reachconf.models import StateSpaceModel, TestCase, TestSuite, UncertaintySpec
from reachconf.zonotope import Zonotope


def passthrough() -> StateSpaceModel:
    return StateSpaceModel(
        f=lambda x, u, p: x, g=lambda x, u, p: u, n_x=1, n_u=1, n_y=1,
        linear=True,
        f_jac=lambda x, u, p: (np.eye(1), np.zeros((1, 1))),
        g_jac=lambda x, u, p: (np.zeros((1, 1)), np.eye(1)),
    )


def two_step_suite() -> TestSuite:
    samples = np.array([[[-0.5], [0.2]], [[0.3], [-0.4]]])
    return TestSuite((TestCase(nominal_u=np.zeros((2, 1)), samples=samples,
                               nominal_x0=np.zeros(1)),))


def scalar_plant(p=(0.5, 2.0)) -> StateSpaceModel:
    return StateSpaceModel(
        f=lambda x, u, pp: np.array([pp[0] * x[0] + pp[1] * u[0]]),
        g=lambda x, u, pp: np.array([x[0]]),
        n_x=1, n_u=1, n_y=1, params=np.asarray(p, dtype=float), linear=True)


def test_get_params_and_clone():
    est = WhiteBoxIdentifier(model=passthrough(), constraints="generator", seed=3)
    params = est.get_params()
    assert params["constraints"] == "generator"
    assert params["seed"] == 3
    assert params["additive"] is False
    twin = clone(est)
    assert twin.get_params()["constraints"] == "generator"
    assert not hasattr(twin, "result_")


def test_white_fit_predict_score():
    est = WhiteBoxIdentifier(model=passthrough())
    suite = two_step_suite()
    fitted = est.fit(suite)
    assert fitted is est
    assert est.status_ == "conformant"
    assert est.alpha_.shape == (2,)
    assert est.cost_ >= 0.0
    assert est.score(suite) == 1.0
    sets = est.predict_reachsets(suite)
    assert len(sets) == 1 and set(sets[0]) == {0, 1}
    over = sets[0][1]
    assert isinstance(over, Zonotope) and over.dim == 1
    under = est.predict_reachsets(suite, mode="under")[0][1]
    assert under.radius()[0] <= over.radius()[0] + 1e-12


def test_white_needs_a_model():
    with pytest.raises(ValueError, match="model"):
        WhiteBoxIdentifier().fit(two_step_suite())


def test_fit_accepts_bare_cases():
    case = two_step_suite().cases[0]
    est = WhiteBoxIdentifier(model=passthrough()).fit([case])
    assert est.status_ == "conformant"
    assert WhiteBoxIdentifier(model=passthrough()).fit(case).status_ == "conformant"


def test_dimension_mismatch_is_rejected():
    wide = TestSuite((TestCase(nominal_u=np.zeros((2, 2)),
                               samples=np.zeros((1, 2, 1)),
                               nominal_x0=np.zeros(1)),))
    with pytest.raises(ValueError, match="input channels"):
        WhiteBoxIdentifier(model=passthrough()).fit(wide)


def test_additive_variant_pads_new_suites():
    suite = two_step_suite()
    est = WhiteBoxIdentifier(model=passthrough(), additive=True).fit(suite)
    assert est.model_.n_u == 2  # one extra channel per output
    assert est.status_ == "conformant"
    # scoring takes the raw suite; the pad happens inside
    assert est.score(suite) == 1.0
    assert est.predict_reachsets(suite)[0][0].dim == 1


def test_gray_fit_recovers_scalar_parameters():
    plant = scalar_plant()
    spec = UncertaintySpec(c_x=np.zeros(1), g_x=np.zeros((1, 1)),
                           c_u=np.zeros(1), g_u=np.zeros((1, 1)))
    suite = generate_suite(plant, spec, 3, 5, 1, seed=4)
    est = GrayBoxIdentifier(model=plant, scheme="sequential", seed=1)
    est.fit(suite)
    np.testing.assert_allclose(est.p_, [0.5, 2.0], atol=1e-3)
    assert est.status_ == "conformant"
    assert est.n_evals_ > 0
    assert clone(est).get_params()["scheme"] == "sequential"
    np.testing.assert_array_equal(est.model_.params, est.p_)


def black_suite(seed=0) -> TestSuite:
    truth = GeneModel(n_p=1, n_y=1, n_u=1, genes=((("var", 0), ("var", 2)),),
                      weights=(np.array([0.1, 0.6, 0.5]),))
    spec = UncertaintySpec.for_io(c_u=np.zeros(1), g_u=0.02 * np.eye(1))
    return generate_suite(truth.as_model(), spec, 2, 10, 2, seed=seed)


def tiny_gp() -> GPConfig:
    return GPConfig(population=16, generations=3, refine_population=8,
                    refine_generations=1, n_subdatasets=2)


def test_black_fit_surfaces_discovered_model():
    truth_text = model_to_text(
        GeneModel(n_p=1, n_y=1, n_u=1, genes=((("var", 0), ("var", 2)),),
                  weights=(np.array([0.1, 0.6, 0.5]),)))
    est = BlackBoxIdentifier(n_p=1, flavor="gp", config=tiny_gp(), seed=2,
                             seed_models=[truth_text])
    suite = black_suite()
    est.fit(suite)
    assert est.status_ == "conformant"
    assert est.score(suite) == 1.0
    assert model_from_text(est.text_).genes == est.gene_model_.genes
    assert est.model_.kind == "narx"
    sets = est.predict_reachsets(suite)
    assert set(sets[0]) == set(range(1, 10))


def test_black_rejects_unknown_flavor():
    with pytest.raises(ValueError, match="flavor"):
        BlackBoxIdentifier(flavor="hybrid").fit(black_suite())


def test_unfitted_estimators_refuse_to_predict():
    est = WhiteBoxIdentifier(model=passthrough())
    with pytest.raises(RuntimeError, match="not fitted"):
        est.predict_reachsets(two_step_suite())
    with pytest.raises(RuntimeError, match="not fitted"):
        est.score(two_step_suite())

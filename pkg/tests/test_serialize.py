"""JSON round-trips for sets, suites, results, and model bundles."""

from types import SimpleNamespace

import numpy as np
import pytest

from reachconf.blackbox import GeneModel, model_to_text
from reachconf.models import TestCase, TestSuite, UncertaintySpec
from reachconf.serialize import (
    load_model_bundle,
    model_bundle,
    read_json,
    result_to_dict,
    spec_from_dict,
    spec_to_dict,
    suite_from_dict,
    suite_to_dict,
    write_json,
    zonotope_from_dict,
    zonotope_to_dict,
)
from reachconf.systems import pedestrian_ss
from reachconf.zonotope import Zonotope


def round_trip(path, to_dict, from_dict, obj):
    write_json(path, to_dict(obj))
    return from_dict(read_json(path))


def test_zonotope_round_trip(tmp_path):
    z = Zonotope([1.0, -2.0], [[0.5, 0.0, 1.0], [0.25, -1.0, 0.0]])
    back = round_trip(tmp_path / "z.json", zonotope_to_dict, zonotope_from_dict, z)
    np.testing.assert_array_equal(back.center, z.center)
    np.testing.assert_array_equal(back.generators, z.generators)


def test_zonotope_round_trip_point(tmp_path):
    z = Zonotope.point([3.0, 4.0])
    back = round_trip(tmp_path / "p.json", zonotope_to_dict, zonotope_from_dict, z)
    assert back.order == 0 and back.generators.shape == (2, 0)
    np.testing.assert_array_equal(back.center, [3.0, 4.0])


def test_spec_round_trip_keeps_fitted_fields(tmp_path):
    spec = UncertaintySpec(c_x=[0.5], g_x=[[1.0, 0.25]], c_u=[0.0, 1.0],
                           g_u=np.eye(2), alpha_x=[2.0, 0.125],
                           alpha_u=[0.3, 0.0], cdelta_u=[0.01, -0.02])
    back = round_trip(tmp_path / "s.json", spec_to_dict, spec_from_dict, spec)
    for f in ("c_x", "g_x", "c_u", "g_u", "alpha_x", "alpha_u",
              "cdelta_x", "cdelta_u"):
        np.testing.assert_array_equal(getattr(back, f), getattr(spec, f))


def test_io_spec_round_trip(tmp_path):
    spec = UncertaintySpec.for_io(c_u=[1.0], g_u=[[0.5]])
    back = round_trip(tmp_path / "io.json", spec_to_dict, spec_from_dict, spec)
    assert back.c_x.size == 0 and back.g_x.shape == (0, 0)


def test_suite_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    ss_case = TestCase(nominal_u=rng.normal(size=(4, 2)),
                       samples=rng.normal(size=(3, 4, 1)),
                       nominal_x0=rng.normal(size=2))
    suite = TestSuite((ss_case,))
    back = round_trip(tmp_path / "suite.json", suite_to_dict, suite_from_dict, suite)
    np.testing.assert_array_equal(back.cases[0].samples, ss_case.samples)
    np.testing.assert_array_equal(back.cases[0].nominal_x0, ss_case.nominal_x0)


def test_io_suite_round_trip_keeps_missing_x0(tmp_path):
    rng = np.random.default_rng(1)
    case = TestCase(nominal_u=rng.normal(size=(4, 2)),
                    samples=rng.normal(size=(2, 4, 1)))
    back = round_trip(tmp_path / "io_suite.json", suite_to_dict, suite_from_dict,
                      TestSuite((case,)))
    assert back.cases[0].nominal_x0 is None


def test_result_record_field_selection():
    base = dict(alpha=np.array([0.5]), cdelta=np.array([0.0]), cost=0.5,
                status="conformant", containment_rate=1.0)
    white = result_to_dict(SimpleNamespace(**base))
    assert set(white) == {"alpha", "cdelta", "cost", "status", "containment_rate"}
    gray = result_to_dict(SimpleNamespace(**base, p=np.array([1.5]), rmse_p=0.1))
    assert gray["p"] == np.array([1.5]) and gray["rmse_p"] == 0.1
    black = result_to_dict(SimpleNamespace(**base, text="(narx 1 1 1 ...)"))
    assert black["model"].startswith("(narx")
    assert "wall_time" not in white


def test_write_json_is_deterministic_and_plain(tmp_path):
    obj = {"b": np.float64(1.5), "a": np.array([1, 2]), "n": np.int64(3),
           "nested": [np.array([[0.25]]), None, True]}
    write_json(tmp_path / "one.json", obj)
    write_json(tmp_path / "two.json", obj)
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()
    back = read_json(tmp_path / "one.json")
    assert back == {"a": [1, 2], "b": 1.5, "n": 3, "nested": [[[0.25]], None, True]}


def test_write_json_creates_parent_dirs(tmp_path):
    write_json(tmp_path / "a" / "b" / "c.json", {"ok": 1})
    assert read_json(tmp_path / "a" / "b" / "c.json") == {"ok": 1}


def fitted_spec(model) -> UncertaintySpec:
    return UncertaintySpec(c_x=np.zeros(model.n_x), g_x=np.eye(model.n_x),
                           c_u=np.zeros(model.n_u), g_u=np.eye(model.n_u),
                           alpha_x=np.full(model.n_x, 0.5),
                           alpha_u=np.full(model.n_u, 0.25))


def test_catalog_bundle_round_trip(tmp_path):
    model = pedestrian_ss().with_params([0.9, 0.02, 1e-4, 0.05])
    bundle = model_bundle(model, fitted_spec(model), system_id="pedestrian_ss")
    write_json(tmp_path / "m.json", bundle)
    loaded, spec = load_model_bundle(read_json(tmp_path / "m.json"))
    np.testing.assert_array_equal(loaded.params, model.params)
    assert loaded.n_x == model.n_x
    np.testing.assert_array_equal(spec.alpha_x, 0.5)


def test_augmented_bundle_reapplies_wrapper(tmp_path):
    model = pedestrian_ss()
    spec = UncertaintySpec(c_x=np.zeros(model.n_x), g_x=np.eye(model.n_x),
                           c_u=np.zeros(model.n_u + model.n_y),
                           g_u=np.eye(model.n_u + model.n_y))
    bundle = model_bundle(model, spec, system_id="pedestrian_ss", augment=True)
    write_json(tmp_path / "aug.json", bundle)
    loaded, _ = load_model_bundle(read_json(tmp_path / "aug.json"))
    # extra input channels feed straight into the outputs
    assert loaded.n_u == model.n_u + model.n_y
    assert loaded.n_y == model.n_y


def test_gene_model_bundle_round_trip(tmp_path):
    gm = GeneModel(n_p=1, n_y=1, n_u=1, genes=((("var", 0), ("var", 2)),),
                   weights=(np.array([0.1, 0.6, 0.5]),))
    spec = UncertaintySpec.for_io(c_u=np.zeros(1), g_u=np.eye(1),
                                  alpha_u=np.array([0.2]))
    bundle = model_bundle(gm, spec)
    write_json(tmp_path / "gm.json", bundle)
    loaded, back = load_model_bundle(read_json(tmp_path / "gm.json"))
    assert loaded.kind == "narx" and loaded.n_p == 1
    y = loaded.step(np.array([[2.0]]), np.array([[0.0], [4.0]]))
    assert y == pytest.approx(0.1 + 0.6 * 2.0 + 0.5 * 0.0)
    np.testing.assert_array_equal(back.alpha_u, [0.2])


def test_text_bundle_accepted_directly():
    gm = GeneModel(n_p=1, n_y=1, n_u=1, genes=((("var", 1),),),
                   weights=(np.array([0.0, 1.0]),))
    spec = UncertaintySpec.for_io(c_u=np.zeros(1), g_u=np.eye(1))
    bundle = model_bundle(model_to_text(gm), spec)
    loaded, _ = load_model_bundle(bundle)
    assert loaded.n_u == 1


def test_unbundleable_model_raises():
    spec = UncertaintySpec.for_io(c_u=np.zeros(1), g_u=np.eye(1))
    with pytest.raises(ValueError, match="neither"):
        model_bundle(object(), spec)
    with pytest.raises(ValueError, match="neither"):
        load_model_bundle({"spec": spec_to_dict(spec), "system": None,
                           "narx_text": None})

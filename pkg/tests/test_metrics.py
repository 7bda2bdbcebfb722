"""Metric records, aggregation, CSV round-trips, safety scaling."""

import csv

import numpy as np
import pytest

from reachconf.conform import identify_white
from reachconf.harness.metrics import (
    FAILURE_COST_RATIO,
    MetricsRow,
    aggregate,
    aggregate_to_csv,
    boxplot_to_csv,
    is_failure,
    normalized_cost,
    reference_cost,
    rows_from_csv,
    rows_to_csv,
    scale_uncertainty,
    validation_containment,
)
from reachconf.models import StateSpaceModel, TestCase, TestSuite, UncertaintySpec


def passthrough_model() -> StateSpaceModel:
    return StateSpaceModel(
        f=lambda x, u, p: x, g=lambda x, u, p: u, n_x=1, n_u=1, n_y=1,
        linear=True,
        f_jac=lambda x, u, p: (np.eye(1), np.zeros((1, 1))),
        g_jac=lambda x, u, p: (np.zeros((1, 1)), np.eye(1)),
    )


def flat_suite(n_m: int, n_k: int, n_s: int = 2) -> TestSuite:
    cases = tuple(
        TestCase(nominal_u=np.zeros((n_k, 1)), samples=np.zeros((n_s, n_k, 1)),
                 nominal_x0=np.zeros(1))
        for _ in range(n_m))
    return TestSuite(cases)


def interval_suite(values) -> TestSuite:
    samples = np.asarray(values, dtype=float).reshape(-1, 1, 1)
    return TestSuite((TestCase(nominal_u=np.zeros((1, 1)), samples=samples,
                               nominal_x0=np.zeros(1)),))


def test_reference_cost_hand_value():
    model = passthrough_model()
    spec = UncertaintySpec(c_x=np.zeros(1), g_x=np.zeros((1, 0)),
                           c_u=np.zeros(1), g_u=np.array([[0.5]]))
    suite = flat_suite(n_m=2, n_k=3)
    # y = u exactly: every step's reach set is the input set, radius 0.5
    assert reference_cost(model, suite, spec) == pytest.approx(2 * 3 * 0.5)
    w = np.array([1.0, 0.0, 1.0])
    assert reference_cost(model, suite, spec, weights=w) == pytest.approx(2 * 2 * 0.5)


def test_rows_csv_round_trip(tmp_path):
    rows = [
        MetricsRow("pedestrian_ss", 0, "white", 1.0000000000000002, False,
                   0.125, rmse_p=None, containment=0.99),
        MetricsRow("narx1", 3, "grayseq", None, True, 2.5,
                   rmse_p=0.0171717171717, containment=None),
    ]
    path = tmp_path / "m.csv"
    rows_to_csv(rows, path)
    assert rows_from_csv(path) == rows


def test_aggregate_groups_and_rates():
    rows = [
        MetricsRow("s", 0, "white", 1.0, False, 1.0),
        MetricsRow("s", 1, "white", 2.0, False, 3.0),
        MetricsRow("s", 2, "white", None, True, 5.0),
        MetricsRow("s", 0, "grayseq", 1.5, False, 1.0, rmse_p=0.1),
    ]
    agg = {(a["system"], a["method"]): a for a in aggregate(rows)}
    w = agg[("s", "white")]
    assert w["runs"] == 3
    assert w["mean_normalized_cost"] == pytest.approx(1.5)
    assert w["median_normalized_cost"] == pytest.approx(1.5)
    assert w["failure_rate"] == pytest.approx(1 / 3)
    assert w["mean_wall_time"] == pytest.approx(3.0)
    assert w["mean_rmse_p"] is None
    g = agg[("s", "grayseq")]
    assert g["failure_rate"] == 0.0
    assert g["mean_rmse_p"] == pytest.approx(0.1)


def test_failure_rules():
    assert is_failure("infeasible", None)
    assert is_failure("nonconformant", 0.9)
    assert not is_failure("conformant", 1.2)
    assert not is_failure("conformant", None)
    assert is_failure("conformant", FAILURE_COST_RATIO * 1.01)


def test_normalized_cost_guards_denominator():
    assert normalized_cost(2.0, 4.0) == 0.5
    with pytest.raises(ValueError):
        normalized_cost(1.0, 0.0)


def test_scale_uncertainty_inflates_alpha_and_cost():
    model = passthrough_model()
    template = UncertaintySpec(c_x=np.zeros(1), g_x=np.zeros((1, 0)),
                               c_u=np.zeros(1), g_u=np.eye(1))
    suite = interval_suite([-0.5, 0.3])
    res = identify_white(model, suite, template)
    assert res.status == "conformant"
    doubled = scale_uncertainty(res, 2.0)
    np.testing.assert_allclose(doubled.alpha, res.alpha * 2)
    assert doubled.cost == pytest.approx(res.cost * 2)
    np.testing.assert_allclose(doubled.spec.alpha_u, res.spec.alpha_u * 2)
    assert doubled.containment_rate is None
    assert validation_containment(model, suite, doubled.spec) == 1.0
    assert scale_uncertainty(res, 1.0) is res
    with pytest.raises(ValueError, match="at least 1"):
        scale_uncertainty(res, 0.5)


def test_boxplot_csv_skips_failures(tmp_path):
    rows = [MetricsRow("s", 0, "white", 1.25, False, 0.1),
            MetricsRow("s", 1, "white", None, True, 0.1)]
    path = tmp_path / "box.csv"
    boxplot_to_csv(rows, path)
    with open(path, newline="") as fh:
        recs = list(csv.reader(fh))
    assert recs[0] == ["system", "method", "suite", "normalized_cost"]
    assert len(recs) == 2
    assert recs[1] == ["s", "white", "0", "1.25"]


def test_aggregate_csv_blank_cells_for_missing(tmp_path):
    rows = [MetricsRow("s", 0, "white", None, True, 0.5)]
    path = tmp_path / "agg.csv"
    aggregate_to_csv(aggregate(rows), path)
    with open(path, newline="") as fh:
        recs = list(csv.DictReader(fh))
    assert recs[0]["mean_normalized_cost"] == ""
    assert recs[0]["failure_rate"] == "1.0"
    assert recs[0]["runs"] == "1"

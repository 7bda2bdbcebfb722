"""Benchmark harness: suite generation, metrics, experiments, CLI."""

from .experiments import (
    COMPARISON_SYSTEMS,
    PROFILES,
    Profile,
    comparison_experiment,
    run_identification,
    scalability_experiment,
    vehicle_experiment,
    worker_count,
)
from .generate import generate_suite, identification_template, random_true_spec
from .metrics import (
    FAILURE_COST_RATIO,
    MetricsRow,
    aggregate,
    is_failure,
    normalized_cost,
    reference_cost,
    rows_from_csv,
    rows_to_csv,
    scale_uncertainty,
    validation_containment,
)

__all__ = [
    "random_true_spec",
    "identification_template",
    "generate_suite",
    "MetricsRow",
    "FAILURE_COST_RATIO",
    "reference_cost",
    "normalized_cost",
    "is_failure",
    "scale_uncertainty",
    "validation_containment",
    "aggregate",
    "rows_to_csv",
    "rows_from_csv",
    "Profile",
    "PROFILES",
    "COMPARISON_SYSTEMS",
    "comparison_experiment",
    "scalability_experiment",
    "vehicle_experiment",
    "run_identification",
    "worker_count",
]

"""Per-run metric records, aggregation, and CSV round-trips."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..conform import build_gos, containment_rate, size_cost_vector

__all__ = [
    "MetricsRow",
    "FAILURE_COST_RATIO",
    "reference_cost",
    "normalized_cost",
    "is_failure",
    "scale_uncertainty",
    "validation_containment",
    "rows_to_csv",
    "rows_from_csv",
    "boxplot_to_csv",
    "aggregate",
    "aggregate_to_csv",
]

# a run counts as failed when no conformant result exists or the sets
# blew up beyond this multiple of the true-model cost
FAILURE_COST_RATIO = 100.0


@dataclass(frozen=True)
class MetricsRow:
    system: str
    suite: int
    method: str
    normalized_cost: float | None
    failure: bool
    wall_time: float
    rmse_p: float | None = None
    containment: float | None = None


def reference_cost(model, suite, true_spec, *, weights=None) -> float:
    """Denominator of the normalized cost: the weighted reach-size cost
    of the true dynamics with the true uncertainty sets, no fitting."""
    gos = build_gos(model, suite, true_spec)
    n_alpha = true_spec.g_x.shape[1] + true_spec.g_u.shape[1]
    gamma = size_cost_vector(gos, true_spec, weights)
    return float(gamma @ np.ones(n_alpha))


def normalized_cost(cost: float, true_cost: float) -> float:
    if not true_cost > 0:
        raise ValueError("true-model cost must be positive")
    return float(cost) / float(true_cost)


def is_failure(status: str, norm_cost: float | None) -> bool:
    if status != "conformant":
        return True
    return norm_cost is not None and norm_cost > FAILURE_COST_RATIO


def scale_uncertainty(result, eps: float):
    """Safety factor: multiply the identified scalings by eps >= 1.

    The containment rate of the returned record is dropped; it must be
    re-measured on validation data.
    """
    if eps < 1:
        raise ValueError("safety factor must be at least 1")
    if eps == 1:
        return result
    if result.alpha is None:
        raise ValueError("cannot scale a result without scalings")
    return dataclasses.replace(
        result, alpha=result.alpha * eps, cost=result.cost * eps,
        spec=result.spec.scaled(eps), containment_rate=None)


def validation_containment(model, suite, spec) -> float:
    """Fraction of the suite's measurements inside the model's reach sets."""
    gos = build_gos(model, suite, spec)
    return containment_rate(gos, suite, spec)


# ---------------------------------------------------------------------------
# CSV


_FIELDS = ("system", "suite", "method", "normalized_cost", "failure",
           "wall_time", "rmse_p", "containment")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_FIELDS)
        for r in rows:
            w.writerow([_cell(getattr(r, f)) for f in _FIELDS])


def rows_from_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(MetricsRow(
                system=rec["system"],
                suite=int(rec["suite"]),
                method=rec["method"],
                normalized_cost=float(rec["normalized_cost"]) if rec["normalized_cost"] else None,
                failure=rec["failure"] == "1",
                wall_time=float(rec["wall_time"]),
                rmse_p=float(rec["rmse_p"]) if rec["rmse_p"] else None,
                containment=float(rec["containment"]) if rec["containment"] else None,
            ))
    return rows


def boxplot_to_csv(rows, path) -> None:
    """Per-suite normalized costs in long form, for box plots."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("system", "method", "suite", "normalized_cost"))
        for r in rows:
            if r.normalized_cost is not None:
                w.writerow((r.system, r.method, r.suite, repr(r.normalized_cost)))


def aggregate(rows) -> list[dict]:
    """Per (system, method): mean cost over non-failures, failure rate,
    mean wall time, mean parameter error where defined."""
    keys = []
    for r in rows:
        k = (r.system, r.method)
        if k not in keys:
            keys.append(k)
    out = []
    for system, method in keys:
        grp = [r for r in rows if (r.system, r.method) == (system, method)]
        costs = [r.normalized_cost for r in grp
                 if not r.failure and r.normalized_cost is not None]
        rmses = [r.rmse_p for r in grp if r.rmse_p is not None]
        cont = [r.containment for r in grp if r.containment is not None]
        out.append({
            "system": system,
            "method": method,
            "runs": len(grp),
            "mean_normalized_cost": float(np.mean(costs)) if costs else None,
            "median_normalized_cost": float(np.median(costs)) if costs else None,
            "failure_rate": float(np.mean([r.failure for r in grp])),
            "mean_wall_time": float(np.mean([r.wall_time for r in grp])),
            "mean_rmse_p": float(np.mean(rmses)) if rmses else None,
            "mean_containment": float(np.mean(cont)) if cont else None,
        })
    return out


def aggregate_to_csv(aggregates, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = ("system", "method", "runs", "mean_normalized_cost",
              "median_normalized_cost", "failure_rate", "mean_wall_time",
              "mean_rmse_p", "mean_containment")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for a in aggregates:
            w.writerow([_cell(a[f]) for f in fields])

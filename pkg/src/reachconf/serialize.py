"""JSON schemas for sets, suites, identification results, and model bundles.

All writers go through one converter so that numpy scalars never leak
into the files; ``write_json`` sorts keys, which keeps byte-identical
output across runs with the same seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .models import TestCase, TestSuite, UncertaintySpec
from .zonotope import Zonotope

__all__ = [
    "zonotope_to_dict",
    "zonotope_from_dict",
    "spec_to_dict",
    "spec_from_dict",
    "suite_to_dict",
    "suite_from_dict",
    "result_to_dict",
    "model_bundle",
    "load_model_bundle",
    "write_json",
    "read_json",
]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# sets and templates


def zonotope_to_dict(z: Zonotope) -> dict:
    """Generators are stored one per row."""
    return {"center": z.center, "generators": z.generators.T}


def zonotope_from_dict(d: dict) -> Zonotope:
    gens = np.asarray(d["generators"], dtype=float)
    center = np.asarray(d["center"], dtype=float)
    if gens.size == 0:
        gens = np.zeros((0, center.shape[0]))
    return Zonotope(center, gens.T)


def spec_to_dict(spec: UncertaintySpec) -> dict:
    return {
        "c_x": spec.c_x, "g_x": spec.g_x,
        "c_u": spec.c_u, "g_u": spec.g_u,
        "alpha_x": spec.alpha_x, "alpha_u": spec.alpha_u,
        "cdelta_x": spec.cdelta_x, "cdelta_u": spec.cdelta_u,
    }


def spec_from_dict(d: dict) -> UncertaintySpec:
    arr = lambda k: np.asarray(d[k], dtype=float)
    return UncertaintySpec(
        c_x=arr("c_x"), g_x=arr("g_x"), c_u=arr("c_u"), g_u=arr("g_u"),
        alpha_x=arr("alpha_x"), alpha_u=arr("alpha_u"),
        cdelta_x=arr("cdelta_x"), cdelta_u=arr("cdelta_u"),
    )


# ---------------------------------------------------------------------------
# test suites


def suite_to_dict(suite: TestSuite) -> dict:
    cases = []
    for c in suite.cases:
        cases.append({
            "nominal_x0": c.nominal_x0,
            "nominal_u": c.nominal_u,
            "samples": c.samples,
        })
    return {"cases": cases}


def suite_from_dict(d: dict) -> TestSuite:
    cases = []
    for c in d["cases"]:
        x0 = c.get("nominal_x0")
        cases.append(TestCase(
            nominal_u=np.asarray(c["nominal_u"], dtype=float),
            samples=np.asarray(c["samples"], dtype=float),
            nominal_x0=None if x0 is None else np.asarray(x0, dtype=float),
        ))
    return TestSuite(tuple(cases))


# ---------------------------------------------------------------------------
# identification results


def result_to_dict(result) -> dict:
    """Common record for white/gray/black results.

    Gray results add the fitted parameters, black results the discovered
    model text; wall time never enters this record.
    """
    d = {
        "alpha": result.alpha,
        "cdelta": result.cdelta,
        "cost": result.cost,
        "status": result.status,
        "containment_rate": result.containment_rate,
    }
    if hasattr(result, "p"):
        d["p"] = result.p
        d["rmse_p"] = getattr(result, "rmse_p", None)
    if hasattr(result, "text"):
        d["model"] = result.text
    return d


# ---------------------------------------------------------------------------
# model bundles (what `validate` consumes)


def model_bundle(model, spec: UncertaintySpec, system_id: str | None = None,
                 system_kwargs: dict | None = None, augment: bool = False) -> dict:
    """Self-contained description of an identified model and its sets.

    Catalog systems are stored by identifier plus parameter vector;
    discovered lag models are passed as serialized text (or a gene model)
    in place of ``model``.  ``augment`` marks a model wrapped with the
    additive output-noise channel; loading re-applies the wrapper.
    """
    from .blackbox import GeneModel, model_to_text

    d = {"spec": spec_to_dict(spec), "system": system_id,
         "system_kwargs": system_kwargs or {}, "params": None,
         "narx_text": None, "augment": bool(augment)}
    if system_id is not None:
        d["params"] = model.params
    elif isinstance(model, GeneModel):
        d["narx_text"] = model_to_text(model)
    elif isinstance(model, str):
        d["narx_text"] = model
    else:
        raise ValueError("model is neither a catalog system nor a text-backed lag model")
    return d


def load_model_bundle(d: dict):
    """Inverse of model_bundle: returns (model, spec)."""
    from .blackbox import model_from_text
    from .systems import make_system

    spec = spec_from_dict(d["spec"])
    if d.get("system"):
        model = make_system(d["system"], **(d.get("system_kwargs") or {}))
        if d.get("params") is not None:
            model = model.with_params(np.asarray(d["params"], dtype=float))
        if d.get("augment"):
            from .conform import augment_with_output_noise

            model = augment_with_output_noise(model)
        return model, spec
    text = d.get("narx_text")
    if not text:
        raise ValueError("bundle carries neither a system id nor model text")
    return model_from_text(text).as_model(), spec

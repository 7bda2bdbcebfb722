"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import numpy as np

from .models import NarxModel, StateSpaceModel, TestCase, TestSuite, UncertaintySpec

__all__ = ["ensure_suite", "check_suite_model", "default_template"]


def ensure_suite(data) -> TestSuite:
    """Accept a TestSuite or an iterable of TestCase objects."""
    if isinstance(data, TestSuite):
        return data
    if isinstance(data, TestCase):
        return TestSuite((data,))
    try:
        cases = tuple(data)
    except TypeError:
        raise TypeError(f"cannot build a test suite from {type(data).__name__}") from None
    if not all(isinstance(c, TestCase) for c in cases):
        raise TypeError("expected TestCase elements")
    return TestSuite(cases)


def check_suite_model(model, suite: TestSuite) -> None:
    """Dimension agreement between measured data and the model."""
    if suite.n_u != model.n_u:
        raise ValueError(f"suite has {suite.n_u} input channels, model expects {model.n_u}")
    if suite.n_y != model.n_y:
        raise ValueError(f"suite has {suite.n_y} output channels, model expects {model.n_y}")
    if isinstance(model, StateSpaceModel):
        for c in suite.cases:
            if c.nominal_x0 is None:
                raise ValueError("state-space identification needs nominal_x0 in every case")
            if c.nominal_x0.shape != (model.n_x,):
                raise ValueError("nominal_x0 has the wrong dimension")
    elif isinstance(model, NarxModel):
        if suite.n_k <= model.n_p:
            raise ValueError("trajectories must be longer than the model order")


def default_template(model) -> UncertaintySpec:
    """Identity templates: one unit generator per state and input channel."""
    if isinstance(model, NarxModel):
        return UncertaintySpec.for_io(c_u=np.zeros(model.n_u), g_u=np.eye(model.n_u))
    return UncertaintySpec(c_x=np.zeros(model.n_x), g_x=np.eye(model.n_x),
                           c_u=np.zeros(model.n_u), g_u=np.eye(model.n_u))

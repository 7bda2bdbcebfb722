"""Estimator-style wrappers around the identification routines.

Each wrapper stores its constructor arguments untouched (so cloning and
grid search work), validates inputs in ``fit``, and exposes the fitted
uncertainty sets through trailing-underscore attributes.  ``fit`` takes
a test suite in place of a feature matrix; ``score`` returns the
fraction of measurements contained in the model's reach sets, so larger
is better, as scorers expect.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .blackbox import identify_black_cgp, identify_black_gp
from .conform import build_gos, containment_rate, identify_white, identify_white_additive
from .conform import augment_with_output_noise, pad_suite_inputs
from .goreach import reach_go
from .graybox import identify_gray
from .models import UncertaintySpec
from .validation import check_suite_model, default_template, ensure_suite

__all__ = [
    "WhiteBoxIdentifier",
    "GrayBoxIdentifier",
    "BlackBoxIdentifier",
]


class _ReachsetEstimator(BaseEstimator):
    """Shared post-fit surface: reach-set prediction and containment scoring."""

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise RuntimeError("estimator is not fitted")

    def _prepare(self, suite):
        """Suite as the fitted model expects it (hook for input padding)."""
        return ensure_suite(suite)

    def predict_reachsets(self, suite, mode: str = "over") -> list:
        """Per-case dict {k: reach set} under the identified uncertainty."""
        self._check_fitted()
        suite = self._prepare(suite)
        remainder = "zero" if mode == "under" else self.remainder_
        gos = build_gos(self.model_, suite, self.spec_, remainder=remainder)
        return [{k: reach_go(go, self.spec_, k, mode=mode) for k in go.steps()}
                for go in gos]

    def score(self, X, y=None) -> float:
        """Fraction of measurements of X inside the identified reach sets."""
        self._check_fitted()
        suite = self._prepare(X)
        gos = build_gos(self.model_, suite, self.spec_)
        return containment_rate(gos, suite, self.spec_)

    def _adopt(self, result, model):
        self.result_ = result
        self.model_ = model
        self.status_ = result.status
        self.alpha_ = result.alpha
        self.cdelta_ = result.cdelta
        self.cost_ = result.cost
        self.containment_rate_ = result.containment_rate
        self.spec_ = result.spec
        if not hasattr(self, "remainder_"):
            self.remainder_ = "zero"
        return self


class WhiteBoxIdentifier(_ReachsetEstimator):
    """Scale uncertainty templates of a known model to cover the data.

    Parameters
    ----------
    model : StateSpaceModel or NarxModel
    template : UncertaintySpec, optional
        Identity templates per channel when omitted.
    constraints : "halfspace" or "generator"
    weights : array-like, optional
        Per-step weights; ones when omitted.
    additive : bool
        Restrict the optimized uncertainty to an additive output block.
    remainder : str
        Linearization-error handling for predicted (not fitted) sets.
    """

    def __init__(self, model=None, template=None, constraints="halfspace",
                 weights=None, additive=False, remainder="zero",
                 engine="auto", seed=0):
        self.model = model
        self.template = template
        self.constraints = constraints
        self.weights = weights
        self.additive = additive
        self.remainder = remainder
        self.engine = engine
        self.seed = seed

    def fit(self, X, y=None):
        if self.model is None:
            raise ValueError("a model is required")
        suite = ensure_suite(X)
        check_suite_model(self.model, suite)
        template = self.template or default_template(self.model)
        kw = dict(constraints=self.constraints, weights=self.weights,
                  engine=self.engine, seed=self.seed)
        self.remainder_ = self.remainder
        if self.additive:
            result = identify_white_additive(self.model, suite, template, **kw)
            self._pad_ = self.model.n_y
            return self._adopt(result, augment_with_output_noise(self.model))
        result = identify_white(self.model, suite, template, **kw)
        self._pad_ = 0
        return self._adopt(result, self.model)

    def _prepare(self, suite):
        suite = ensure_suite(suite)
        if getattr(self, "_pad_", 0):
            suite = pad_suite_inputs(suite, self._pad_)
        return suite


class GrayBoxIdentifier(_ReachsetEstimator):
    """Joint search over model parameters and uncertainty scalings.

    ``scheme`` picks the search: "sequential" minimizes the deviation
    underapproximation, "sequential-ls" a least-squares surrogate, and
    "simultaneous" the exact white-box cost per evaluation.
    """

    def __init__(self, model=None, template=None, scheme="sequential", p0=None,
                 constraints="halfspace", weights=None, fit_centers=False,
                 max_evals=None, restarts=2, engine="auto", seed=0):
        self.model = model
        self.template = template
        self.scheme = scheme
        self.p0 = p0
        self.constraints = constraints
        self.weights = weights
        self.fit_centers = fit_centers
        self.max_evals = max_evals
        self.restarts = restarts
        self.engine = engine
        self.seed = seed

    def fit(self, X, y=None):
        if self.model is None:
            raise ValueError("a model family is required")
        suite = ensure_suite(X)
        check_suite_model(self.model, suite)
        template = self.template or default_template(self.model)
        result = identify_gray(self.model, suite, template, self.scheme, self.p0,
                               constraints=self.constraints, weights=self.weights,
                               fit_centers=self.fit_centers, seed=self.seed,
                               max_evals=self.max_evals, restarts=self.restarts,
                               engine=self.engine)
        self.p_ = result.p
        self.nlp_cost_ = result.nlp_cost
        self.n_evals_ = result.n_evals
        return self._adopt(result, self.model.with_params(result.p))


class BlackBoxIdentifier(_ReachsetEstimator):
    """Discover lagged input-output dynamics and conformant sets from data.

    ``flavor`` selects plain evolution against free-run error ("gp") or
    the two-phase variant whose late fitness is the conformance cost
    ("cgp").
    """

    def __init__(self, template=None, n_p=2, flavor="gp", config=None,
                 constraints="halfspace", weights=None, engine="auto", seed=0,
                 suite_t1=None, suite_t2=None, seed_models=None):
        self.template = template
        self.n_p = n_p
        self.flavor = flavor
        self.config = config
        self.constraints = constraints
        self.weights = weights
        self.engine = engine
        self.seed = seed
        self.suite_t1 = suite_t1
        self.suite_t2 = suite_t2
        self.seed_models = seed_models

    def fit(self, X, y=None):
        suite = ensure_suite(X)
        template = self.template or UncertaintySpec.for_io(
            c_u=np.zeros(suite.n_u), g_u=np.eye(suite.n_u))
        kw = dict(config=self.config, seed=self.seed,
                  constraints=self.constraints, weights=self.weights,
                  engine=self.engine, seed_models=self.seed_models)
        if self.flavor == "gp":
            result = identify_black_gp(suite, template, self.n_p,
                                       suite_t1=self.suite_t1, **kw)
        elif self.flavor == "cgp":
            result = identify_black_cgp(suite, template, self.n_p,
                                        suite_t1=self.suite_t1,
                                        suite_t2=self.suite_t2, **kw)
        else:
            raise ValueError(f"unknown flavor {self.flavor!r}")
        self.gene_model_ = result.model
        self.text_ = result.text
        self.fitness_ = result.fitness
        return self._adopt(result, result.model.as_model())

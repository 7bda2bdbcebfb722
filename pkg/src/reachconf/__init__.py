"""Reachset-conformant system identification with zonotopic uncertainty.

The functional core lives in the topic modules (zonotope, goreach,
conform, graybox, blackbox); `estimators` wraps it in a fit-style API,
and `harness` holds suite generation, experiments, and the CLI.
"""

from .blackbox import (
    GPConfig,
    conformance_score,
    identify_black_cgp,
    identify_black_gp,
    model_from_text,
    model_to_text,
)
from .conform import (
    ConformResult,
    augment_with_output_noise,
    containment_rate,
    identify_white,
    identify_white_additive,
    pad_suite_inputs,
    size_cost_vector,
)
from .estimators import BlackBoxIdentifier, GrayBoxIdentifier, WhiteBoxIdentifier
from .goreach import GOModel, build_go, build_gos, reach_go
from .graybox import (
    GrayResult,
    deviation_cost_ls,
    deviation_cost_under,
    identify_gray,
)
from .models import (
    NarxModel,
    SimulationDivergedError,
    StateSpaceModel,
    TestCase,
    TestSuite,
    UncertaintySpec,
    simulate_narx,
    simulate_ss,
)
from .systems import SYSTEM_IDS, make_system
from .zonotope import DegenerateSetError, HalfspacePolytope, Zonotope

__version__ = "0.1.0"

__all__ = [
    "Zonotope",
    "HalfspacePolytope",
    "DegenerateSetError",
    "StateSpaceModel",
    "NarxModel",
    "TestCase",
    "TestSuite",
    "UncertaintySpec",
    "SimulationDivergedError",
    "simulate_ss",
    "simulate_narx",
    "GOModel",
    "build_go",
    "build_gos",
    "reach_go",
    "ConformResult",
    "identify_white",
    "identify_white_additive",
    "augment_with_output_noise",
    "pad_suite_inputs",
    "containment_rate",
    "size_cost_vector",
    "GrayResult",
    "identify_gray",
    "deviation_cost_under",
    "deviation_cost_ls",
    "GPConfig",
    "identify_black_gp",
    "identify_black_cgp",
    "conformance_score",
    "model_to_text",
    "model_from_text",
    "WhiteBoxIdentifier",
    "GrayBoxIdentifier",
    "BlackBoxIdentifier",
    "SYSTEM_IDS",
    "make_system",
    "__version__",
]

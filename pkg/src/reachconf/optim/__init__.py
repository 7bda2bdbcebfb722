"""Self-contained optimization backends: LP solving and derivative-free NLP."""

from .simplex import LinearProgram, LpSolution, solve_lp
from .neldermead import NlpProblem, NlpSolution, solve_nlp

__all__ = [
    "LinearProgram",
    "LpSolution",
    "solve_lp",
    "NlpProblem",
    "NlpSolution",
    "solve_nlp",
]

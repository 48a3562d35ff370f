"""Exact tools for parametric Markov chains.

Value functions, state-space collapse by post-dominance, arithmetic
circuits and branching programs, derivative chains, and the
non-negative-weighted-reachability / monotonicity relations.
"""

from .algebra import Polynomial, RationalFunction, parse_polynomial
from .pmc import PMC

__all__ = ["PMC", "Polynomial", "RationalFunction", "parse_polynomial"]
__version__ = "0.1.0"

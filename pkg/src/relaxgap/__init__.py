"""Penalized distribution optimization over finite alphabets.

Computes constrained and divergence-relaxed extrema of log-marginal
functionals, checks the gap bounds between them, and applies the machinery
to rate-distortion with decoder side information.
"""

from .errors import (
    CapExceededError,
    DomainError,
    InputError,
    MapError,
    NumericDomainError,
    RelaxGapError,
    StructuralError,
)
from .simplex import AlphabetProduct, ConditionalTable, JointDist

__version__ = "0.1.0"

__all__ = [
    "AlphabetProduct",
    "CapExceededError",
    "ConditionalTable",
    "DomainError",
    "InputError",
    "JointDist",
    "MapError",
    "NumericDomainError",
    "RelaxGapError",
    "StructuralError",
    "__version__",
]

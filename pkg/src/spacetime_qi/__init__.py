"""Numerical toolkit for free-field vacuum correlations and their classical counterparts.

Modules
-------
fieldkernel
    Equal-time two-point function of a free scalar field.
wick
    Smeared-field expectations in the vacuum and polynomial states.
spinbell
    Singlet correlations, CHSH optimisation and a bounded hidden-variable model.
spatial
    Detector regions, g-factors and the factorized model with localized detectors.
randomfield
    Lattice complex Gaussian field reproducing the vacuum moments.
"""

from .exceptions import (
    BoundViolation,
    ConvergenceError,
    DomainError,
    PreconditionError,
    SizeLimitError,
)

__version__ = "0.1.0"

__all__ = [
    "BoundViolation",
    "ConvergenceError",
    "DomainError",
    "PreconditionError",
    "SizeLimitError",
    "__version__",
]

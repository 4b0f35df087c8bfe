"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConvergenceError(RuntimeError):
    """A quadrature or extrapolation did not reach the requested tolerance."""


class SizeLimitError(ValueError):
    """A combinatorial computation exceeds the configured size budget."""


class PreconditionError(ValueError):
    """Inputs violate a documented precondition of a construction."""


class BoundViolation(RuntimeError):
    """A sampled hidden variable left the interval [-1, 1]."""

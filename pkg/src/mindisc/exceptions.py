"""Exception types raised across the package."""


class DomainError(ValueError):
    """Input lies outside the domain on which an operation is defined."""


class UnsupportedError(ValueError):
    """Requested (target, kernel) pair or capability has no implementation."""


class IllConditionedError(ArithmeticError):
    """Jittered factorization failed even at the maximum allowed jitter."""


class NumericalError(ArithmeticError):
    """A computed quantity is non-finite or violates a sign invariant."""

"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A model, contract or Monte-Carlo parameter violates its invariant."""


class DimensionMismatchError(ValueError):
    pass


class DomainError(ValueError):
    """Closed-form price requested outside the formula's domain."""


class NonFiniteStateError(RuntimeError):
    """An Euler iterate became NaN or infinite."""

"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class DomainError(ValueError):
    """Raised when a quantity is undefined at the requested point."""


class ChainUndefinedError(ValueError):
    """Raised when an identity-chain gap is requested but a component is undefined."""


class TreeStructureError(ValidationError):
    """Raised when a hypothesis tree violates its structural invariants."""


class EmptyFilterError(RuntimeError):
    """Raised when a filter removes every hypothesis."""


class DegenerateCombinationWarning(UserWarning):
    """Signals that a combined p-value is exactly zero (infinite statistic)."""

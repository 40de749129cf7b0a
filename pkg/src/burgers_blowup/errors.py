"""Exception types shared across the package."""


class BlowupError(Exception):
    """Base class for all package errors."""


class NumericalFailure(BlowupError, RuntimeError):
    """An iterative solver failed to converge.

    The offending input is kept on the exception so callers can log it.
    """

    def __init__(self, message, **context):
        self.context = context
        if context:
            detail = ", ".join(f"{k}={v!r}" for k, v in context.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class DomainError(BlowupError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class BlowupProximityError(DomainError):
    """Requested time is too close to (or past) the first blowup time."""


class SingularWeightError(DomainError):
    """The weighted norm would integrate across the singular point X = 0."""


class ConfigurationError(BlowupError, ValueError):
    """A scenario violates one of its structural preconditions."""

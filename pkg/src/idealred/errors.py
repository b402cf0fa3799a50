"""Shared exception types."""


class IdealredError(Exception):
    """Base class for all package-specific errors."""


class NotPrimeError(IdealredError):
    pass


class FieldMismatchError(IdealredError):
    """Two objects over different prime fields were combined."""


class FieldTooSmallError(IdealredError):
    """The prime field does not have enough elements for a requested step.

    Carries the number of distinct points the step would need.
    """

    def __init__(self, message: str, required_points: int | None = None):
        super().__init__(message)
        self.required_points = required_points


class ZeroPolynomialError(IdealredError):
    """An operation that is undefined on the zero polynomial was requested."""


class MissingAssignmentError(IdealredError):
    """Evaluation was attempted without a value for some variable."""


class DeskCapError(IdealredError):
    """A symbolic routine was asked to exceed its hard desk-scale cap."""


class ParameterError(IdealredError):
    """Pipeline parameters are inconsistent or over budget."""


class IsolationFailure(IdealredError):
    """All retry attempts were exhausted without a verified extraction."""

    def __init__(self, message: str, attempts: list | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class CoefficientNotFound(IdealredError):
    """Every scanned coefficient evaluated to zero at every probe point."""


class VerificationError(IdealredError):
    """An assembled circuit disagreed with its target at a check point."""

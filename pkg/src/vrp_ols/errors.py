"""Exception hierarchy.

``ValidationError`` subclasses are numeric or model failures (CLI exit 3);
``ProblemFileError`` covers malformed input files (CLI exit 2).
"""


class VrpError(Exception):
    """Base class for all package errors."""


class ValidationError(VrpError):
    pass


class Singular(ValidationError):
    pass


class DegenerateUpdate(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class NotPositive(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class NotDiagonal(ValidationError):
    pass


class NotEqualVariance(ValidationError):
    pass


class DegenerateDesign(ValidationError):
    pass


class DegenerateRoot(ValidationError):
    """A root formula has a vanishing denominator; ``which`` names it."""

    def __init__(self, which: str, message: str | None = None):
        self.which = which
        super().__init__(message or f"vanishing denominator: {which}")


class ProblemFileError(VrpError):
    """Malformed problem file; ``field`` points at the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)

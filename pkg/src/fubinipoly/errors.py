"""Exception and warning types shared across the package."""


class FubiniPolyError(Exception):
    """Base class for all package errors."""


class DomainViolation(FubiniPolyError):
    """An argument lies outside the mathematical domain of the operation."""


class PrecisionLoss(FubiniPolyError):
    """A floating evaluation cannot meet the requested error tolerance."""


class BracketFailure(FubiniPolyError):
    """Zero bracketing could not certify an expected sign change.

    This indicates corrupted input (an invalid zero set for the previous
    polynomial), never a normal runtime condition.
    """


class Indeterminate(FubiniPolyError):
    """A query cannot be decided at the current enclosure resolution.

    ``overlaps`` lists the offending enclosures as ``(set_tag, index)``
    pairs so that callers can refine exactly those and retry.
    """

    def __init__(self, message: str, overlaps=()):
        super().__init__(message)
        self.overlaps = tuple(overlaps)


class QuadratureFailure(FubiniPolyError):
    """Numerical integration cannot reach the requested tolerance."""


class ConfigNote(UserWarning):
    """Non-fatal note: a product configuration carries no vanishing guarantee."""

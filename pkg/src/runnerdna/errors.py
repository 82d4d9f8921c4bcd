"""Exception hierarchy.

Every error raised for bad input data derives from :class:`DataError` so the
CLI can map it to a single exit code.
"""

from __future__ import annotations


class DataError(ValueError):
    """Base class for all data-related failures."""


class MissingColumn(DataError):
    pass


class MalformedTimestamp(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class TooShort(DataError):
    pass


class GapTooLarge(DataError):
    pass


class InvalidRecord(DataError):
    pass


class KeyMismatch(DataError):
    pass


class KTooLarge(DataError):
    pass


class SingularFit(DataError):
    pass


class NonPositiveThreshold(DataError):
    pass


class DegenerateSeries(DataError):
    """Zero-variance input where a positive spread is required.

    ``indicator`` names the DNA indicator that failed, when known.
    """

    def __init__(self, message: str, indicator: str | None = None):
        super().__init__(message)
        self.indicator = indicator


class EmptyCohort(DataError):
    pass


class NonPositiveInterval(DataError):
    pass


class SingleClass(DataError):
    pass


class EmptyData(DataError):
    pass


class NotTrainingSet(DataError):
    pass


class LengthMismatch(DataError):
    pass


class UnknownLabel(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class DegeneratePooledVariance(DataError):
    pass


class TooFewSamples(DataError):
    pass


class DurationTooShort(DataError):
    pass


class InvalidSpec(DataError):
    pass

"""Exception hierarchy.

Everything raised for bad input data derives from :class:`DataError`; the
CLI maps those to exit code 2. :class:`InvariantViolation` maps to exit 3.
"""


class DataError(ValueError):
    """Input data violates a precondition."""


class StreamError(DataError):
    """An event stream fails validation at a specific record."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"{type(self).__name__} at event {self.index}")


class Unsorted(StreamError):
    pass


class OutOfBounds(StreamError):
    pass


class BadPolarity(StreamError):
    pass


class OutOfSpan(StreamError):
    pass


class IntervalOutOfSpan(DataError):
    pass


class AnchorOutOfSpan(DataError):
    pass


class AnchorOutOfExposure(DataError):
    pass


class AnchorOutOfTarget(DataError):
    pass


class TargetNotNested(DataError):
    pass


class TargetOutOfSpan(DataError):
    pass


class DegenerateVideo(DataError):
    pass


class IntervalNotOnGrid(DataError):
    pass


class TooFewFrames(DataError):
    pass


class TooFewLatents(DataError):
    pass


class NonContiguousExposures(DataError):
    pass


class SizeMismatch(DataError):
    pass


class NotDivisible(DataError):
    pass


class ResolutionMismatch(DataError):
    pass


class AspectMismatch(DataError):
    pass


class Downscale(DataError):
    pass


class ZeroBins(DataError):
    pass


class LengthMismatch(DataError):
    pass


class TooSmall(DataError):
    pass


class VideoTooShort(DataError):
    pass


class FormatError(DataError):
    """A file does not parse as the expected format."""


class MissingFile(DataError):
    pass


class InvariantViolation(Exception):
    """Loaded or generated data breaks a documented invariant."""

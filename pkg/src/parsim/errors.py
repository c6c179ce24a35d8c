"""Exception hierarchy.

Every error raised for bad input data derives from ``ParsError`` so the
command line can map it to the data-error exit status.
"""


class ParsError(Exception):
    """Base class for all parsim data errors."""


class InvalidSpecError(ParsError, ValueError):
    pass


class OutOfBoundsError(ParsError, ValueError):
    pass


class SpectrumRangeError(ParsError, ValueError):
    pass


class InvalidPlanError(ParsError, ValueError):
    pass


class AmbiguousPlanError(InvalidPlanError):
    pass


class InvalidNoiseError(ParsError, ValueError):
    pass


class MalformedTraceError(ParsError, ValueError):
    pass


class EmptyInputError(ParsError, ValueError):
    pass


class MalformedRecordError(ParsError, ValueError):
    pass


class EmptyGridError(ParsError, ValueError):
    pass


class IncompleteScanError(ParsError, ValueError):
    pass


class InvalidWindowError(ParsError, ValueError):
    pass


class ShapeError(ParsError, ValueError):
    pass


class InvalidProfileError(ParsError, ValueError):
    pass


class UnsupportedFormatError(ParsError):
    pass


class CorruptDatasetError(ParsError):
    """Raised when a dataset file ends early or carries trailing bytes.

    ``offset`` is the byte offset at which decoding failed and
    ``record_index`` the record being decoded (None inside the header).
    """

    def __init__(self, message, offset, record_index=None):
        super().__init__(message)
        self.offset = offset
        self.record_index = record_index

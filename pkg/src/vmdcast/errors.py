"""Exception hierarchy.

Everything raised on purpose by this package derives from ``VmdcastError``.
The two intermediate classes decide the CLI exit code: ``DataError`` maps to
2 and ``NumericalError`` to 3.
"""


class VmdcastError(Exception):
    """Base class for all package errors."""


class DataError(VmdcastError):
    """Input data is missing, malformed or unsuitable."""


class NumericalError(VmdcastError):
    """A numerical procedure failed (divergence, degeneracy)."""


class ShapeError(VmdcastError, ValueError):
    """Array shapes or lengths are inconsistent."""


class SpecError(VmdcastError, ValueError):
    """A configuration or model definition is invalid."""


class StateError(VmdcastError, RuntimeError):
    """An operation was called in the wrong order."""


class InvalidSignalError(DataError):
    pass


class SignalTooShortError(DataError):
    pass


class EmptySeriesError(DataError):
    pass


class CsvParseError(DataError):
    pass


class CorruptCheckpointError(DataError):
    pass


class IncompatibleCheckpointError(DataError):
    pass


class EmptyBatchError(DataError):
    pass


class DegenerateScaleError(DataError):
    pass


class DegenerateModeError(NumericalError):
    pass


class TrainingDivergedError(NumericalError):
    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class ZeroVarianceError(NumericalError):
    pass

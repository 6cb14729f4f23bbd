"""Exception types raised across the package."""


class SeqCopyError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(SeqCopyError, ValueError):
    pass


class InvalidArgumentError(SeqCopyError, ValueError):
    pass


class EmptyInputError(SeqCopyError, ValueError):
    pass


class OutOfVocabularyError(SeqCopyError, KeyError):
    pass


class EmptySupportError(SeqCopyError, ValueError):
    """Every position of a pointer distribution was masked out."""


class ConsistencyError(SeqCopyError, RuntimeError):
    """Internal bookkeeping disagrees with itself (shapes, traces, ...)."""


class DeterminismError(SeqCopyError, RuntimeError):
    pass


class InvalidInstanceError(SeqCopyError, ValueError):
    pass


class DivergenceError(SeqCopyError, FloatingPointError):
    pass


class CheckpointFormatError(SeqCopyError, ValueError):
    pass


class CheckpointCorruptError(SeqCopyError, ValueError):
    pass


class IncompatibleCheckpointError(SeqCopyError, ValueError):
    pass

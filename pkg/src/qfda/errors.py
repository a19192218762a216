"""Exception types shared across the package."""


class QfdaError(Exception):
    """Base class for all package errors."""


class FormatError(QfdaError):
    """A file does not match its declared format (bad magic, bad header)."""


class ConsistencyError(QfdaError):
    """Inputs that must agree do not (counts, dimensions, labels)."""


class SizeError(QfdaError):
    """An image or dataset is too small to process."""


class SplitError(QfdaError):
    """A class is too small to split into nonempty train/val/test parts."""


class DataError(QfdaError):
    """An operation received empty or degenerate data."""


class NumericError(QfdaError):
    """A matrix factorization or eigensolve failed."""


class OptimizationError(QfdaError):
    """Every cost evaluation in an optimization run failed."""

"""Exception types shared across the package."""


class NcLabError(Exception):
    """Base class for all package errors."""


class DimensionError(NcLabError, ValueError):
    """Shapes are empty, mismatched, or violate an operation's size bounds."""


class DegeneracyError(NcLabError, ValueError):
    """A matrix or dataset is singular / rank deficient / missing classes."""


class NotPSDError(NcLabError, ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class ParameterError(NcLabError, ValueError):
    """A scalar parameter is outside its admissible range."""


class TrainingDivergedError(NcLabError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")

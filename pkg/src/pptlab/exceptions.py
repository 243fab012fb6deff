"""Exception hierarchy shared by all pptlab modules."""

from __future__ import annotations


class PptlabError(Exception):
    """Base class for all pptlab errors."""


class ValidationError(PptlabError):
    """An input object violates its documented invariants."""


class DimensionError(ValidationError):
    """Tensor extents are incompatible with the requested operation."""


class SingularityError(PptlabError):
    """A matrix required to be full rank is (numerically) rank deficient."""


class ConvergenceError(PptlabError):
    """An iterative routine did not converge within its iteration budget."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class CapacityError(PptlabError):
    """A dense construction would exceed the configured size guard."""


class DegenerateStateError(PptlabError):
    """A state with (numerically) zero norm cannot be processed."""


class ConversionError(PptlabError):
    """An MPS could not be converted back into an evolution model."""

    def __init__(self, message: str, site: int | None = None):
        super().__init__(message)
        self.site = site


class BoundViolationError(PptlabError):
    """A tomography window support exceeded the declared environment bound."""


class UnsupportedPredictionError(PptlabError):
    """Prediction was requested for a model that cannot be extrapolated."""

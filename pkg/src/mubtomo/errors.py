"""Exception types raised across the package."""


class UnsupportedDimensionError(ValueError):
    """Raised for a single-photon dimension outside the tabulated range 2..5."""


class DimensionMismatchError(ValueError):
    """Raised when two objects that must share a Hilbert-space dimension do not."""


class CompletenessError(RuntimeError):
    """Raised when a measurement plan cannot determine the density matrix."""


class PhysicalityError(ValueError):
    """Raised when a matrix that should be a density matrix is not one."""

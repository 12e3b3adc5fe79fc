"""Exception hierarchy shared by all modules."""


class LocalizerError(Exception):
    """Base class for all errors raised by this package."""


class NumericalFailure(LocalizerError):
    """A numerical kernel did not converge or broke down."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class GapClosedError(NumericalFailure):
    """A matrix required to be invertible has eigenvalues at (or within tolerance of) zero."""


class AmbiguousFlowError(NumericalFailure):
    """A path sample stays singular after the maximal number of refinements."""


class GeometryError(LocalizerError, ValueError):
    """Invalid lattice geometry, or a truncation region that does not fit into it."""


class DimensionError(LocalizerError, ValueError):
    """Operands with incompatible dimensions."""


class ConfigError(LocalizerError, ValueError):
    """Invalid run configuration."""

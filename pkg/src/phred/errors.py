"""Exception hierarchy shared across the package."""


class PhredError(Exception):
    """Base class for all package errors."""


class StructureError(PhredError):
    """A matrix violates the port-Hamiltonian structural contract
    (dimension mismatch, non-skew J, indefinite R, ...)."""


class EvaluationError(PhredError):
    """A model callback produced non-finite values.  Carries the offending
    state in ``.state`` when available."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class IntegrationError(PhredError):
    """Time stepping failed.  ``.time`` holds the step timestamp."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class RankError(PhredError):
    """Requested dimension exceeds the numerical rank of the data."""


class OrientationError(PhredError):
    """Trial and test subspaces are (nearly) orthogonal, so no biorthonormal
    basis pair exists at working precision."""


class LinearizationError(PhredError):
    """The Hessian at the linearization point is not positive definite."""


class ShiftError(PhredError):
    """An interpolation shift collides with a system pole, or the shift set
    is not closed under conjugation."""


class EstimationError(PhredError):
    """A sampled estimator was called with an unusable sample set."""


class ComparisonError(PhredError):
    """Two trajectories cannot be compared (e.g. different time grids)."""


class ConfigError(PhredError):
    """A run configuration is malformed or inconsistent."""

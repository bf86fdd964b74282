"""Exception hierarchy for the measurement laboratory."""


class JointMeasError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDimensionError(JointMeasError, ValueError):
    """A truncation dimension is too small or inconsistent."""


class SpaceMismatchError(JointMeasError, ValueError):
    """Operands live on different composite spaces."""


class HermiticityError(JointMeasError, ValueError):
    """A generator that must be Hermitian is not.

    The offending defect ``max|H - H^dagger|`` is kept on ``defect``.
    """

    def __init__(self, defect: float, message: str | None = None):
        self.defect = float(defect)
        super().__init__(message or f"operator is not Hermitian (defect {self.defect:.3e})")


class InvalidStateError(JointMeasError, ValueError):
    """A state vector or Gaussian state violates its invariants."""


class InvalidModelError(JointMeasError, ValueError):
    """A measurement model was requested with forbidden parameters."""


class InfeasibleError(JointMeasError, RuntimeError):
    """No feasible state was found for a range-constrained supremum."""


class GridError(JointMeasError, ValueError):
    """A quadrature grid is too small or too coarse."""


class TruncationValidityError(JointMeasError, RuntimeError):
    """Displaced states leave the region where the truncation is trustworthy."""


class ConfigError(JointMeasError, ValueError):
    """A scenario configuration is malformed or names an unknown model."""

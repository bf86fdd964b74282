"""Numerical lab for joint position-momentum measurement: error operators, maximal rms errors and uncertainty-relation checks."""

from .exceptions import (
    ConfigError,
    GridError,
    HermiticityError,
    InfeasibleError,
    InvalidDimensionError,
    InvalidModelError,
    InvalidStateError,
    JointMeasError,
    SpaceMismatchError,
    TruncationValidityError,
)
from .models import (
    CATALOG,
    MeasurementModel,
    ModeState,
    arthurs_kelly,
    biased_variant,
    build_model,
    identity_model,
    swap_rotation_model,
)
from .modespace import CompositeSpace, ModeSpace, OperatorMatrix, StateVector, composite, make_mode

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "CompositeSpace",
    "ConfigError",
    "GridError",
    "HermiticityError",
    "InfeasibleError",
    "InvalidDimensionError",
    "InvalidModelError",
    "InvalidStateError",
    "JointMeasError",
    "MeasurementModel",
    "ModeSpace",
    "ModeState",
    "OperatorMatrix",
    "SpaceMismatchError",
    "StateVector",
    "TruncationValidityError",
    "arthurs_kelly",
    "biased_variant",
    "build_model",
    "composite",
    "identity_model",
    "make_mode",
    "swap_rotation_model",
]

"""Error and disturbance operators, partial expectations and maximal rms errors."""

from .moments import gaussian_moment_on, gaussian_split, partial_expectation
from .operators import (
    SELECTORS,
    ErrorOperators,
    error_forms,
    error_operators,
    heisenberg_final,
    heisenberg_forms,
    lift,
    product_operator,
    resolve_backend,
    squared_operator,
)
from .pointer import PointerDistribution, hermite_functions, pointer_joint_distribution
from .report import DELTA_NAMES, ErrorReport, error_report
from .suprema import (
    ConstrainedResult,
    Defects,
    RangeBox,
    RmsValue,
    constrained_maximal_rms,
    grows_without_bound,
    maximal_rms,
    system_mean_operator,
    system_moment_operator,
    unbiasedness_defect,
)

__all__ = [
    "SELECTORS",
    "DELTA_NAMES",
    "ConstrainedResult",
    "Defects",
    "ErrorOperators",
    "ErrorReport",
    "PointerDistribution",
    "RangeBox",
    "RmsValue",
    "constrained_maximal_rms",
    "error_forms",
    "error_operators",
    "error_report",
    "gaussian_moment_on",
    "gaussian_split",
    "grows_without_bound",
    "heisenberg_final",
    "heisenberg_forms",
    "hermite_functions",
    "lift",
    "maximal_rms",
    "partial_expectation",
    "pointer_joint_distribution",
    "product_operator",
    "resolve_backend",
    "squared_operator",
    "system_mean_operator",
    "system_moment_operator",
    "unbiasedness_defect",
]

"""Collected maximal rms errors for one model."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..models import MeasurementModel
from .operators import SELECTORS, resolve_backend
from .suprema import (
    ConstrainedResult,
    Defects,
    RangeBox,
    RmsValue,
    constrained_maximal_rms,
    maximal_rms,
    unbiasedness_defect,
)

DELTA_NAMES = {
    "eps_Xi": "delta_ei_x",
    "eps_Pi": "delta_ei_p",
    "eps_Xf": "delta_ef_x",
    "eps_Pf": "delta_ef_p",
    "del_X": "delta_d_x",
    "del_P": "delta_d_p",
}


@dataclass
class ErrorReport:
    """The six maximal rms values, optional range-constrained values and defects.

    ``margins`` and ``flags`` are filled in by the inequality checks.
    """

    backend: str
    deltas: dict[str, RmsValue]
    defects: Defects
    constrained: dict[str, ConstrainedResult] | None = None
    box: RangeBox | None = None
    margins: dict[str, float] = field(default_factory=dict)
    flags: dict[str, str] = field(default_factory=dict)

    def value(self, name: str) -> float:
        return self.deltas[name].value

    def primed(self, name: str) -> float:
        if self.constrained is None:
            raise KeyError("report has no range-constrained values")
        return self.constrained[name].value

    def __getattr__(self, name):
        # expose delta_ei_x and friends as attributes
        deltas = self.__dict__.get("deltas", {})
        if name in deltas:
            return deltas[name].value
        raise AttributeError(name)


def error_report(
    m: MeasurementModel,
    backend: str | None = None,
    box: RangeBox | None = None,
    seed: int = 0,
    system_dim: int | None = None,
) -> ErrorReport:
    backend = resolve_backend(m, backend)
    deltas = {DELTA_NAMES[k]: maximal_rms(k, m, backend) for k in SELECTORS}
    constrained = None
    if box is not None:
        constrained = {
            DELTA_NAMES[k]: constrained_maximal_rms(k, m, box, backend, seed=seed, system_dim=system_dim)
            for k in SELECTORS
        }
    return ErrorReport(backend, deltas, unbiasedness_defect(m, backend), constrained, box)

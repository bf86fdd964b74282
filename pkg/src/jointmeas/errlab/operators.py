"""Error and disturbance operators and their Heisenberg-picture ingredients.

For a quadratic process every Heisenberg operator is an affine form in the
initial quadratures, so the six operators are kept as :class:`QuadForm`
objects and lifted onto a truncated Fock space only when needed. The lift
uses the exact affine map rather than conjugating by the truncated unitary,
which leaks through the top Fock level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..exceptions import InvalidModelError, SpaceMismatchError
from ..gaussian import QuadForm, heisenberg_form
from ..kronalg import KronSum
from ..models import MU_P, MU_X, P, X, MeasurementModel
from ..modespace import CompositeSpace, OperatorMatrix

SELECTORS = ("eps_Xi", "eps_Pi", "eps_Xf", "eps_Pf", "del_X", "del_P")


def resolve_backend(m: MeasurementModel, backend: str | None) -> str:
    """Pick a concrete backend; ``both`` models default to the exact one."""
    if backend in (None, "both"):
        return "gaussian" if m.backend in ("gaussian", "both") else "fock"
    if backend not in ("fock", "gaussian"):
        raise ValueError(f"unknown backend {backend!r}")
    if m.backend != "both" and m.backend != backend:
        raise InvalidModelError(f"model {m.name} only supports the {m.backend} backend")
    return backend


def _coordinate(index: int) -> QuadForm:
    return QuadForm.quadrature(6, index)


def heisenberg_forms(m: MeasurementModel) -> dict[str, QuadForm]:
    """Initial and final system quadratures and final pointer positions."""
    sm = m.symplectic
    return {
        "x_i": _coordinate(X),
        "p_i": _coordinate(P),
        "x_f": heisenberg_form(_coordinate(X), sm),
        "p_f": heisenberg_form(_coordinate(P), sm),
        "mu_Xf": heisenberg_form(_coordinate(MU_X), sm),
        "mu_Pf": heisenberg_form(_coordinate(MU_P), sm),
    }


@dataclass(frozen=True)
class ErrorOperators:
    """The retrodictive and predictive errors and the disturbances.

    Entries are :class:`QuadForm` for the Gaussian backend and
    :class:`OperatorMatrix` for the Fock backend.
    """

    eps_Xi: object
    eps_Pi: object
    eps_Xf: object
    eps_Pf: object
    del_X: object
    del_P: object

    def __getitem__(self, name: str):
        if name not in SELECTORS:
            raise KeyError(f"unknown error operator {name!r}")
        return getattr(self, name)

    def items(self):
        return [(k, getattr(self, k)) for k in SELECTORS]


def error_forms(m: MeasurementModel) -> ErrorOperators:
    h = heisenberg_forms(m)
    return ErrorOperators(
        eps_Xi=h["mu_Xf"] - h["x_i"],
        eps_Pi=h["mu_Pf"] - h["p_i"],
        eps_Xf=h["mu_Xf"] - h["x_f"],
        eps_Pf=h["mu_Pf"] - h["p_f"],
        del_X=h["x_f"] - h["x_i"],
        del_P=h["p_f"] - h["p_i"],
    )


def lift(q: QuadForm, space: CompositeSpace) -> OperatorMatrix:
    """``c . r + c0`` on the truncated quadratures of ``space``."""
    if q.linear.size != 2 * len(space.factors):
        raise SpaceMismatchError(f"form of length {q.linear.size} on {len(space.factors)} modes")
    terms = []
    for i, c in enumerate(q.linear):
        if c != 0.0:
            mode = space.factors[i // 2]
            locs = [None] * len(space.factors)
            locs[i // 2] = mode.x_op if i % 2 == 0 else mode.p_op
            terms.append((complex(c), tuple(locs)))
    if q.constant != 0.0:
        terms.append((complex(q.constant), (None,) * len(space.factors)))
    return OperatorMatrix(space, kron=KronSum(space.dims, terms))


def error_operators(m: MeasurementModel, backend: str | None = None, dims: Sequence[int] | None = None) -> ErrorOperators:
    """The six operators on the requested backend (Fock lifts use ``dims`` if given)."""
    forms = error_forms(m)
    if resolve_backend(m, backend) == "gaussian":
        return forms
    space = m.space if dims is None else m.space.with_dims(dims)
    return ErrorOperators(**{k: lift(q, space) for k, q in forms.items()})


def product_operator(q1: QuadForm, q2: QuadForm, space: CompositeSpace) -> OperatorMatrix:
    """Exact compression of ``q1 q2`` onto the truncated space.

    Products of quadratures are formed one level higher and cut back, so the
    top-level matrix element is that of the untruncated operator.
    """
    big = space.padded(1)
    prod = lift(q1, big) @ lift(q2, big)
    return prod.compress(space.dims)


def squared_operator(q: QuadForm, space: CompositeSpace) -> OperatorMatrix:
    return product_operator(q, q, space)


def heisenberg_final(O: OperatorMatrix | QuadForm, m: MeasurementModel):
    """Heisenberg picture operator at the end of the interaction.

    A :class:`QuadForm` is mapped exactly through the affine symplectic map.
    An :class:`OperatorMatrix` is conjugated by the truncated unitary,
    ``U^dagger O U``; that is only trustworthy on low-lying levels.
    """
    if isinstance(O, QuadForm):
        return heisenberg_form(O, m.symplectic)
    if not O.space.same_as(m.space):
        raise SpaceMismatchError("operator is not on the model's space")
    U = m.unitary
    return OperatorMatrix(m.space, U.entries.conj().T @ O.entries @ U.entries)


def split_form(q: QuadForm) -> tuple[np.ndarray, QuadForm]:
    """Separate ``q`` into system coefficients (x, p) and the apparatus part."""
    sys = q.linear[:2].copy()
    rest = q.linear.copy()
    rest[:2] = 0.0
    return sys, QuadForm(rest, q.constant)

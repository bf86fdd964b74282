"""Partial expectations over the fixed apparatus state."""

from __future__ import annotations

import numpy as np

from ..exceptions import HermiticityError, SpaceMismatchError
from ..gaussian import QuadForm, first_moment, second_moment
from ..models import SYSTEM, MeasurementModel
from ..modespace import HERMITIAN_TOL, OperatorMatrix, single_mode_space
from .operators import split_form


def partial_expectation(O: OperatorMatrix, m: MeasurementModel, check_hermitian: bool = True) -> OperatorMatrix:
    """System operator ``A`` with ``<psi|A|psi> = <psi, phi_ap|O|psi, phi_ap>``.

    The apparatus state is truncated to the factor dims of ``O``.
    """
    space = O.space
    if len(space.factors) != len(m.space.factors) or space.roles != m.space.roles:
        raise SpaceMismatchError("operator layout does not match the model")
    vecs = m.apparatus_vectors(space.dims)
    d = space.dims[SYSTEM]
    sys_space = single_mode_space(d, space.hbar)
    if O.kron is not None:
        contracted = O.kron.contract(vecs)
        A = OperatorMatrix(sys_space, kron=contracted)
    else:
        phi = np.ones(1, dtype=complex)
        for k in sorted(vecs):
            phi = np.kron(phi, vecs[k])
        t = O.entries.reshape(d, phi.size, d, phi.size)
        A = OperatorMatrix(sys_space, np.einsum("a,iajb,b->ij", phi.conj(), t, phi))
    if check_hermitian:
        defect = A.hermiticity_defect()
        if defect > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(A.entries)))):
            raise HermiticityError(defect, "partial expectation of a non-Hermitian operator")
    return A


def gaussian_split(q: QuadForm, m: MeasurementModel) -> tuple[np.ndarray, float, float]:
    """For ``q = s . r_sys + b . r_ap + c0`` return (s, B, K).

    ``B`` and ``K`` are the first and second moments of the apparatus part in
    the initial apparatus state, so for any system state with mean ``mu`` and
    covariance ``Sigma``: ``<q^2> = (s.mu + B)^2 + K - B^2 + s^T Sigma s``.
    """
    s, rest = split_form(q)
    ap = m.apparatus_gaussian()
    rest_ap = QuadForm(rest.linear[2:], rest.constant)
    return s, first_moment(rest_ap, ap), second_moment(rest_ap, ap)


def gaussian_moment_on(q: QuadForm, m: MeasurementModel, system_mean, system_cov) -> float:
    """``<q^2>`` for a system state given by its first and second moments."""
    s, B, K = gaussian_split(q, m)
    mean = float(s @ np.asarray(system_mean))
    return (mean + B) ** 2 + K - B**2 + float(s @ np.asarray(system_cov) @ s)


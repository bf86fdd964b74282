"""Fast in-process invariant checks behind ``jointmeas selftest``."""

from __future__ import annotations

import numpy as np

from .errlab import error_forms, maximal_rms, partial_expectation, product_operator, unbiasedness_defect
from .gaussian import omega, second_moment
from .models import ModeState, arthurs_kelly, biased_variant, swap_rotation_model
from .modespace import commutator, composite, make_mode, residual_norms
from .verify import (
    MARGIN_TOL,
    UNDEFINED,
    appendix_variance_identity_check,
    check_commutator_identities,
    check_seven_inequalities,
)

SMALL = (8, 8, 8)


def _canonical_commutator() -> tuple[bool, str]:
    sp = composite((10, 6, 6))
    x, p = sp.quadrature(0), sp.quadrature(1)
    _, interior = residual_norms(commutator(x, p), 1j)
    return interior < 1e-12, f"interior residual {interior:.1e}"


def _unitarity() -> tuple[bool, str]:
    U = arthurs_kelly(dims=SMALL).unitary.entries
    err = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    return err < 1e-10, f"max |U'U - I| {err:.1e}"


def _symplectic() -> tuple[bool, str]:
    S = biased_variant(arthurs_kelly(pointer_squeeze=2.0, dims=SMALL), gain_x=2.0).symplectic.S
    err = float(np.max(np.abs(S @ omega(3) @ S.T - omega(3))))
    return err < 1e-10, f"max |S W S' - W| {err:.1e}"


def _identities() -> tuple[bool, str]:
    worst = 0.0
    for m in (arthurs_kelly(dims=SMALL), swap_rotation_model(SMALL)):
        worst = max(worst, max(r.interior for r in check_commutator_identities(m).values()))
    return worst < 1e-8, f"worst interior residual {worst:.1e}"


def _ak_errors() -> tuple[bool, str]:
    m = arthurs_kelly(pointer_squeeze=2.0, dims=SMALL)
    dx = maximal_rms("eps_Xi", m, "gaussian").value
    dp = maximal_rms("eps_Pi", m, "gaussian").value
    ok = abs(dx**2 - 1.0) < 1e-12 and abs(dp**2 - 0.25) < 1e-12
    return ok, f"Delta_ei x^2 = {dx**2:.6g}, Delta_ei p^2 = {dp**2:.6g}"


def _backend_moment() -> tuple[bool, str]:
    m = arthurs_kelly(dims=(24, 14, 14))
    psi = ModeState(0.7, -0.4)
    q = error_forms(m).eps_Xi
    g = second_moment(q, m.initial_gaussian(psi))
    A = partial_expectation(product_operator(q, q, m.space), m).entries
    v = psi.fock(24)
    f = float(np.real(np.vdot(v, A @ v)))
    rel = abs(f - g) / g
    return rel < 1e-5, f"relative gap {rel:.1e}"


def _swap() -> tuple[bool, str]:
    m = swap_rotation_model(SMALL)
    flags = check_seven_inequalities(m, None, "gaussian").flags
    dx = maximal_rms("eps_Xi", m, "gaussian").value
    ok = dx == 0.0 and flags["eq21"] == UNDEFINED
    return ok, f"Delta_ei x = {dx:g}, eq21 {flags['eq21']}"


def _variance_identity() -> tuple[bool, str]:
    r = appendix_variance_identity_check(ModeState(0.0, 0.0), 3.0, 0.5)
    return abs(r.lhs - 10.0) < 1e-12, f"lhs {r.lhs:.12g}"


def _unbiased() -> tuple[bool, str]:
    d = unbiasedness_defect(arthurs_kelly(dims=SMALL), "fock").max()
    return d < 1e-8, f"max defect {d:.1e}"


def _margins() -> tuple[bool, str]:
    ms = check_seven_inequalities(arthurs_kelly(pointer_squeeze=0.5, dims=SMALL), None, "gaussian")
    worst = min(v for v in ms.margins.values() if np.isfinite(v))
    return worst >= -MARGIN_TOL, f"smallest margin {worst:.2e}"


def _mode_ccr() -> tuple[bool, str]:
    mode = make_mode(12)
    c = mode.x_op @ mode.p_op - mode.p_op @ mode.x_op
    err = float(np.max(np.abs(c[:-1, :-1] - 1j * np.eye(11))))
    return err < 1e-13, f"[x, p] defect below top level {err:.1e}"


CHECKS = (
    ("single-mode canonical commutator", _mode_ccr),
    ("composite canonical commutator", _canonical_commutator),
    ("interaction unitarity", _unitarity),
    ("symplectic map", _symplectic),
    ("commutator identities", _identities),
    ("Arthurs-Kelly error values", _ak_errors),
    ("backend second-moment agreement", _backend_moment),
    ("swap counterexample", _swap),
    ("swap variance identity", _variance_identity),
    ("Arthurs-Kelly unbiasedness", _unbiased),
    ("Arthurs-Kelly inequality margins", _margins),
)


def run_selftest() -> list[tuple[str, bool, str]]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out

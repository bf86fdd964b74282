"""Checks of the commutator identities and the error/disturbance inequalities."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errlab import (
    DELTA_NAMES,
    RangeBox,
    error_forms,
    error_operators,
    error_report,
    heisenberg_forms,
    lift,
    maximal_rms,
    product_operator,
    resolve_backend,
    system_mean_operator,
    unbiasedness_defect,
)
from .errlab.moments import partial_expectation
from .exceptions import TruncationValidityError
from .gaussian import push_state, second_moment
from .models import MU_P, MU_X, SYSTEM, MeasurementModel, ModeState, swap_rotation_model
from .modespace import (
    ModeSpace,
    OperatorMatrix,
    commutator,
    evolve_unitary,
    make_mode,
    residual_norms,
    single_mode_space,
)

# margins above -MARGIN_TOL * hbar count as holding
MARGIN_TOL = 1e-6
# rms values below ZERO_TOL * sqrt(hbar) count as zero when deciding 0 x inf
ZERO_TOL = 1e-9
UNBIASED_TOL = 1e-8
# discrepancies below this are roundoff; no convergence order is fitted
ROUNDOFF_FLOOR = 1e-13

HOLDS = "holds"
VIOLATED = "violated"
UNDEFINED = "undefined_0_times_inf"
INCONCLUSIVE = "inconclusive_lower_bound"


# displacements ---------------------------------------------------------------


def displacement_operator(x: float, p: float, mode: ModeSpace) -> OperatorMatrix:
    """``D = exp[(i/hbar)(p x_op - x p_op)]`` on the truncated mode.

    Warns when the displaced vacuum holds more than dim/4 photons, beyond
    which the truncated operator is no longer a faithful displacement.
    """
    photons = (x * x + p * p) / (2.0 * mode.hbar)
    if photons > mode.dim / 4.0:
        warnings.warn(
            f"displacement ({x:.3g}, {p:.3g}) puts {photons:.2f} photons in a {mode.dim}-level mode",
            stacklevel=2,
        )
    space = single_mode_space(mode.dim, mode.hbar)
    H = OperatorMatrix(space, -(p * mode.x_op - x * mode.p_op))
    return evolve_unitary(H, 1.0)


def valid_block(mode: ModeSpace) -> int:
    """Number of low levels on which displacement identities are checked."""
    return max(1, mode.dim // 4)


def displacement_shift_residual(x: float, p: float, mode: ModeSpace) -> float:
    """Max deviation of ``D^dag x D - (x + x0)`` and ``D^dag p D - (p + p0)`` on the low block."""
    D = displacement_operator(x, p, mode).entries
    k = valid_block(mode)
    eye = np.eye(mode.dim)
    rx = D.conj().T @ mode.x_op @ D - (mode.x_op + x * eye)
    rp = D.conj().T @ mode.p_op @ D - (mode.p_op + p * eye)
    return float(max(np.abs(rx[:k, :k]).max(), np.abs(rp[:k, :k]).max()))


def displacement_derivative_residuals(x: float, p: float, mode: ModeSpace, h: float) -> dict[str, float]:
    """Central-difference check of the four derivative identities of ``D``.

    ``i hbar dD/dx = (p_op - p/2) D``, ``-i hbar dD/dp = (x_op - x/2) D`` and
    the adjoint forms, compared on the low block.
    """
    hb = mode.hbar
    k = valid_block(mode)
    eye = np.eye(mode.dim)
    D = displacement_operator(x, p, mode).entries
    dDx = (displacement_operator(x + h, p, mode).entries - displacement_operator(x - h, p, mode).entries) / (2 * h)
    dDp = (displacement_operator(x, p + h, mode).entries - displacement_operator(x, p - h, mode).entries) / (2 * h)
    Dd = D.conj().T
    res = {
        "d_dx": 1j * hb * dDx - (mode.p_op - 0.5 * p * eye) @ D,
        "d_dx_adjoint": -1j * hb * dDx.conj().T - Dd @ (mode.p_op - 0.5 * p * eye),
        "d_dp": -1j * hb * dDp - (mode.x_op - 0.5 * x * eye) @ D,
        "d_dp_adjoint": 1j * hb * dDp.conj().T - Dd @ (mode.x_op - 0.5 * x * eye),
    }
    return {name: float(np.abs(r[:k, :k]).max()) for name, r in res.items()}


def displacement_group_phase(x1: float, p1: float, x2: float, p2: float, mode: ModeSpace) -> tuple[complex, float]:
    """Phase ``c`` with ``D1 D2 = c D12`` on the low block, and the fit residual."""
    k = valid_block(mode)
    lhs = (displacement_operator(x1, p1, mode).entries @ displacement_operator(x2, p2, mode).entries)[:k, :k]
    rhs = displacement_operator(x1 + x2, p1 + p2, mode).entries[:k, :k]
    c = complex(np.vdot(rhs.ravel(), lhs.ravel()) / np.vdot(rhs.ravel(), rhs.ravel()))
    return c, float(np.abs(lhs - c * rhs).max())


# commutator identities ---------------------------------------------------------


@dataclass(frozen=True)
class IdentityResidual:
    raw: float
    interior: float


def check_commutator_identities(m: MeasurementModel, dims=None, levels: int = 2) -> dict[str, IdentityResidual]:
    """Residuals of the predictive, retrodictive and mixed commutator identities.

    Operators are lifted onto the truncated quadratures. ``raw`` includes the
    top-level truncation artifact; ``interior`` drops the top ``levels``
    Fock levels of every factor.
    """
    E = error_operators(m, "fock", dims)
    space = E.eps_Xi.space
    h = heisenberg_forms(m)
    xi, pi = lift(h["x_i"], space), lift(h["p_i"], space)
    ihb = 1j * space.hbar
    c = commutator
    identities = {
        "eq14": c(E.eps_Xf, E.eps_Pf) - ihb,
        "eq15": c(E.eps_Xi, E.eps_Pi) - (-ihb - c(xi, E.eps_Pi) + c(pi, E.eps_Xi)),
        "eq16_xi_dp": c(E.eps_Xi, E.del_P) - (-ihb - c(xi, E.del_P) + c(pi, E.eps_Xi)),
        "eq16_dx_pi": c(E.del_X, E.eps_Pi) - (-ihb - c(xi, E.eps_Pi) + c(pi, E.del_X)),
        "eq17_xf_dp": c(E.eps_Xf, E.del_P) - (-ihb + c(pi, E.eps_Xf)),
        "eq17_dx_pf": c(E.del_X, E.eps_Pf) - (-ihb - c(xi, E.eps_Pf)),
    }
    return {k: IdentityResidual(*residual_norms(R, 0.0, levels)) for k, R in identities.items()}


# inequalities -----------------------------------------------------------------


def product_margin(a: float, b: float, rhs: float, hbar: float) -> tuple[float, str]:
    """Margin ``a*b - rhs`` with the 0 x inf case reported as undefined."""
    zero = ZERO_TOL * np.sqrt(hbar)
    inf_a, inf_b = np.isinf(a), np.isinf(b)
    if (inf_a and b <= zero) or (inf_b and a <= zero):
        return float("nan"), UNDEFINED
    if inf_a or inf_b:
        return float("inf"), HOLDS
    margin = a * b - rhs
    return margin, HOLDS if margin >= -MARGIN_TOL * hbar else VIOLATED


@dataclass
class InequalityMargins:
    """Named ``lhs - rhs`` residuals and their status flags."""

    margins: dict[str, float] = field(default_factory=dict)
    flags: dict[str, str] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)

    def add(self, name: str, margin: float, flag: str) -> None:
        self.margins[name] = float(margin)
        self.flags[name] = flag

    def all_hold(self) -> bool:
        return all(f in (HOLDS, UNDEFINED) for f in self.flags.values())


def _finite_range(name: str, margin: float, hbar: float, certified: str, ms: InequalityMargins) -> None:
    if margin >= -MARGIN_TOL * hbar:
        flag = HOLDS
    else:
        flag = INCONCLUSIVE if certified == "lower_bound" else VIOLATED
    ms.add(name, margin, flag)


def check_seven_inequalities(
    m: MeasurementModel,
    box: RangeBox | None = None,
    backend: str | None = None,
    psi: ModeState | None = None,
    seed: int = 0,
    system_dim: int | None = None,
) -> InequalityMargins:
    """Margins of the predictive, retrodictive and error-disturbance relations.

    With a ``box`` the finite-range relations are evaluated from range-
    constrained suprema. On the Fock backend those are lower bounds, so a
    nonnegative margin confirms a relation and a negative one is reported as
    inconclusive. ``psi`` (default vacuum) feeds the input-state
    uncertainty check and the pointer relation.
    """
    backend = resolve_backend(m, backend)
    hb = m.hbar
    rep = error_report(m, backend, box, seed=seed, system_dim=system_dim)
    d = {k: rep.value(k) for k in DELTA_NAMES.values()}
    ms = InequalityMargins()
    half = hb / 2.0
    for name, a, b in (
        ("eq18", "delta_ef_x", "delta_ef_p"),
        ("eq21", "delta_ei_x", "delta_ei_p"),
        ("eq22_ei_x_d_p", "delta_ei_x", "delta_d_p"),
        ("eq22_ei_p_d_x", "delta_ei_p", "delta_d_x"),
        ("eq22_ef_x_d_p", "delta_ef_x", "delta_d_p"),
        ("eq22_ef_p_d_x", "delta_ef_p", "delta_d_x"),
    ):
        ms.add(name, *product_margin(d[a], d[b], half, hb))

    if box is not None:
        c = rep.constrained
        v = {k: r.value for k, r in c.items()}
        cert = "lower_bound" if any(r.certified == "lower_bound" for r in c.values()) else "exact"
        L, P = box.L, box.P
        rhs = half * (1 + 2 * hb / (L * P))
        _finite_range("eq18_primed", v["delta_ef_x"] * v["delta_ef_p"] - half, hb, cert, ms)
        _finite_range("eq26", (v["delta_ei_x"] + hb / P) * (v["delta_ei_p"] + hb / L) - rhs, hb, cert, ms)
        _finite_range("eq27_ei_x_d_p", (v["delta_ei_x"] + hb / P) * (v["delta_d_p"] + hb / L) - rhs, hb, cert, ms)
        _finite_range("eq27_ei_p_d_x", (v["delta_ei_p"] + hb / L) * (v["delta_d_x"] + hb / P) - rhs, hb, cert, ms)
        _finite_range("eq28_ef_x_d_p", v["delta_ef_x"] * (v["delta_d_p"] + hb / L) - half, hb, cert, ms)
        _finite_range("eq28_ef_p_d_x", v["delta_ef_p"] * (v["delta_d_x"] + hb / P) - half, hb, cert, ms)
        ms.notes["finite_range"] = (
            "constrained suprema are lower bounds on the Fock backend; "
            "nonnegative margins confirm, negative margins are inconclusive"
            if cert == "lower_bound"
            else "constrained suprema evaluated in closed form"
        )

    psi = psi if psi is not None else ModeState(hbar=hb)
    g = psi.gaussian()
    ms.add("eq1", *product_margin(float(np.sqrt(g.cov[0, 0])), float(np.sqrt(g.cov[1, 1])), half, hb))
    biased = rep.defects.Xi > UNBIASED_TOL or rep.defects.Pi > UNBIASED_TOL
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        margin = arthurs_kelly_pointer_check(m, psi, backend)
    if biased:
        ms.margins["eq6"] = float(margin)
        ms.flags["eq6"] = "premise_violated"
    else:
        ms.add("eq6", margin, HOLDS if margin >= -MARGIN_TOL * hb else VIOLATED)
    return ms


def final_pointer_moments(m: MeasurementModel, psi: ModeState, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of (mu_Xf, mu_Pf) for input ``psi``."""
    backend = resolve_backend(m, backend)
    if backend == "gaussian":
        final = push_state(m.symplectic, m.initial_gaussian(psi))
        idx = [MU_X, MU_P]
        return final.mean[idx], final.cov[np.ix_(idx, idx)]
    h = heisenberg_forms(m)
    forms = [h["mu_Xf"], h["mu_Pf"]]
    vec = psi.fock(m.dims[SYSTEM])

    def ev(op):
        A = partial_expectation(op, m, check_hermitian=False).entries
        return float(np.real(np.vdot(vec, A @ vec)))

    mean = np.array([ev(lift(q, m.space)) for q in forms])
    cov = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            sym = 0.5 * (product_operator(forms[i], forms[j], m.space) + product_operator(forms[j], forms[i], m.space))
            cov[i, j] = ev(sym) - mean[i] * mean[j]
    return mean, cov


def arthurs_kelly_pointer_check(m: MeasurementModel, psi: ModeState, backend: str | None = None) -> float:
    """Final pointer spread product minus hbar.

    The bound presumes a retrodictively unbiased process; for a biased one a
    warning is issued and the value is still returned.
    """
    defects = unbiasedness_defect(m, backend)
    if defects.Xi > UNBIASED_TOL or defects.Pi > UNBIASED_TOL:
        warnings.warn(f"model {m.name} is not retrodictively unbiased; the pointer bound need not hold", stacklevel=2)
    _, cov = final_pointer_moments(m, psi, backend)
    return float(np.sqrt(cov[0, 0] * cov[1, 1]) - m.hbar)


# unbiased per-state bounds ----------------------------------------------------

UNIFORM_PRODUCTS = (
    ("eps_Xi", "eps_Pi"),
    ("eps_Xi", "del_P"),
    ("eps_Xf", "del_P"),
    ("eps_Pi", "del_X"),
    ("eps_Pf", "del_X"),
)


def uniform_product_margins(m: MeasurementModel, states: np.ndarray, backend: str = "fock") -> dict[str, float]:
    """Smallest ``<A^2><B^2> - hbar^2/4`` over system states for the five unbiased bounds.

    ``states`` is an array of system vectors (Fock) or a sequence of
    :class:`ModeState` (Gaussian).
    """
    forms = error_forms(m)
    target = m.hbar**2 / 4.0
    names = {k for pair in UNIFORM_PRODUCTS for k in pair}
    if backend == "gaussian":
        vals = {k: np.array([second_moment(forms[k], m.initial_gaussian(s)) for s in states]) for k in names}
    else:
        states = np.atleast_2d(states)
        dims = list(m.dims)
        dims[SYSTEM] = states.shape[1]
        space = m.space.with_dims(dims)
        vals = {}
        for k in names:
            A = partial_expectation(product_operator(forms[k], forms[k], space), m).entries
            vals[k] = np.real(np.einsum("si,ij,sj->s", states.conj(), A, states))
    return {f"{a}*{b}": float(np.min(vals[a] * vals[b]) - target) for a, b in UNIFORM_PRODUCTS}


# appendix --------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceIdentity:
    lhs: float
    rhs: float
    residual: float


def appendix_variance_identity_check(
    psi: ModeState,
    pointer_p_mean: float,
    pointer_p_var: float | None = None,
    backend: str = "gaussian",
    dims=(32, 8, 16),
) -> VarianceIdentity:
    """``<eps_Pi^2>`` on the swap process versus ``Var mu_P + Var p + (<mu_P> - <p>)^2``."""
    hb = psi.hbar
    m = swap_rotation_model(dims, hb, pointer_p_mean, pointer_p_var)
    q = error_forms(m).eps_Pi
    var_mu = m.pointers[1].var_x
    if backend == "gaussian":
        lhs = second_moment(q, m.initial_gaussian(psi))
        mean_p, var_p = psi.p0, psi.var_p
    else:
        vec = psi.fock(m.dims[SYSTEM])
        mode = m.space.factors[SYSTEM]
        big = make_mode(mode.dim + 1, hb)
        p2 = (big.p_op @ big.p_op)[: mode.dim, : mode.dim]
        mean_p = float(np.real(np.vdot(vec, mode.p_op @ vec)))
        var_p = float(np.real(np.vdot(vec, p2 @ vec))) - mean_p**2
        A = partial_expectation(product_operator(q, q, m.space), m).entries
        lhs = float(np.real(np.vdot(vec, A @ vec)))
    rhs = var_mu + var_p + (pointer_p_mean - mean_p) ** 2
    return VarianceIdentity(float(lhs), float(rhs), float(abs(lhs - rhs)))


# box averaging ------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSpaceBox:
    """Rectangle of displacements with an ``nx`` by ``np_`` sample grid."""

    L: float
    P: float
    x0: float = 0.0
    p0: float = 0.0
    nx: int = 9
    np_: int = 9

    def __post_init__(self):
        if self.L <= 0 or self.P <= 0:
            raise ValueError("box sides must be positive")
        if self.nx < 3 or self.np_ < 3:
            raise ValueError("the grid needs at least 3 x 3 points")

    def refined(self) -> "PhaseSpaceBox":
        """Halve the spacing."""
        return PhaseSpaceBox(self.L, self.P, self.x0, self.p0, 2 * self.nx - 1, 2 * self.np_ - 1)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(self.x0 - self.L / 2, self.x0 + self.L / 2, self.nx),
            np.linspace(self.p0 - self.P / 2, self.p0 + self.P / 2, self.np_),
        )


@dataclass
class GridEvaluation:
    """Field samples and the divergence-theorem bookkeeping on one grid."""

    box: PhaseSpaceBox
    v: np.ndarray = field(repr=False)
    divergence: np.ndarray = field(repr=False)
    commutator: np.ndarray = field(repr=False)
    max_photons: float
    volume_integral: float
    boundary_flux: float
    pointwise_residual: float

    @property
    def discrepancy(self) -> float:
        return abs(self.volume_integral - self.boundary_flux)


@dataclass
class DivergenceReport:
    """Pointwise identity residuals, divergence-theorem check and the averaging chain."""

    coarse: GridEvaluation
    fine: GridEvaluation | None
    order: float
    max_abs_v: float
    chain: dict[str, float]
    chain_holds: bool
    valid: bool
    system_dim: int


def _evaluate_grid(EX, EP, C, psi, mode, box: PhaseSpaceBox) -> GridEvaluation:
    hb = mode.hbar
    xs, ps = box.axes()
    hx, hp = xs[1] - xs[0], ps[1] - ps[0]
    xg = np.concatenate([[xs[0] - hx], xs, [xs[-1] + hx]])
    pg = np.concatenate([[ps[0] - hp], ps, [ps[-1] + hp]])
    v = np.zeros((xg.size, pg.size, 2))
    comm = np.zeros((xs.size, ps.size), dtype=complex)
    nop = mode.number_op
    photons = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, x in enumerate(xg):
            for j, p in enumerate(pg):
                phi = displacement_operator(x, p, mode).entries @ psi
                v[i, j, 0] = np.real(np.vdot(phi, EX @ phi))
                v[i, j, 1] = np.real(np.vdot(phi, EP @ phi))
                photons = max(photons, float(np.real(np.vdot(phi, nop @ phi))))
                if 0 < i < xg.size - 1 and 0 < j < pg.size - 1:
                    comm[i - 1, j - 1] = np.vdot(phi, C @ phi)
    div = (v[2:, 1:-1, 0] - v[:-2, 1:-1, 0]) / (2 * hx) + (v[1:-1, 2:, 1] - v[1:-1, :-2, 1]) / (2 * hp)
    vol = float(trapezoid(trapezoid(div, ps, axis=1), xs))
    vi = v[1:-1, 1:-1]
    flux = float(
        trapezoid(vi[-1, :, 0], ps) - trapezoid(vi[0, :, 0], ps) + trapezoid(vi[:, -1, 1], xs) - trapezoid(vi[:, 0, 1], xs)
    )
    resid = float(np.max(np.abs(comm - (-1j * hb * (1 + div)))))
    return GridEvaluation(box, vi, div, comm, photons, vol, flux, resid)


def box_average_divergence_check(
    m: MeasurementModel,
    psi: np.ndarray | None = None,
    box: PhaseSpaceBox | None = None,
    system_dim: int = 26,
    backend: str | None = None,
    refine: bool = True,
    strict: bool = True,
) -> DivergenceReport:
    """Evaluate the commutator-divergence identity over a box of displacements.

    For each displacement the state ``D psi`` gives the bias field ``v`` and
    the expected commutator of the retrodictive errors. The divergence is
    taken by central differences, integrated with the trapezoid rule and
    compared with the trapezoid boundary flux on the original and a refined
    grid. The chain of lower bounds on ``Delta_ei x * Delta_ei p`` is
    evaluated term by term.

    Every sampled state, ghost points included, must keep its mean photon
    number at or below ``system_dim / 4``; otherwise
    :class:`TruncationValidityError` is raised (or, with ``strict=False``,
    a warning is issued and ``valid`` is False).
    """
    box = box or PhaseSpaceBox(4.0, 4.0)
    hb = m.hbar
    d = int(system_dim)
    mode = make_mode(d, hb)
    if psi is None:
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1.0
    psi = np.asarray(psi, dtype=complex)
    forms = error_forms(m)
    qx, qp = forms.eps_Xi, forms.eps_Pi
    EX = system_mean_operator(qx, m, d)
    EP = system_mean_operator(qp, m, d)
    dims = list(m.dims)
    dims[SYSTEM] = d
    space = m.space.with_dims(dims)
    comm_op = product_operator(qx, qp, space) - product_operator(qp, qx, space)
    C = partial_expectation(comm_op, m, check_hermitian=False).entries

    coarse = _evaluate_grid(EX, EP, C, psi, mode, box)
    fine = _evaluate_grid(EX, EP, C, psi, mode, box.refined()) if refine else None
    photons = max(coarse.max_photons, fine.max_photons if fine else 0.0)
    valid = photons <= d / 4.0
    if not valid:
        msg = f"displaced states reach {photons:.2f} photons in a {d}-level system (limit {d / 4:.2f})"
        if strict:
            raise TruncationValidityError(msg)
        warnings.warn(msg, stacklevel=2)

    order = float("nan")
    if fine is not None and coarse.discrepancy > ROUNDOFF_FLOOR and fine.discrepancy > 0:
        order = float(np.log2(coarse.discrepancy / fine.discrepancy))

    ev = fine or coarse
    L, P = box.L, box.P
    xs, ps = ev.box.axes()
    backend = resolve_backend(m, backend)
    dx = maximal_rms("eps_Xi", m, backend).value
    dp = maximal_rms("eps_Pi", m, backend).value
    lhs = float("nan") if product_margin(dx, dp, 0.0, hb)[1] == UNDEFINED else dx * dp
    with np.errstate(invalid="ignore"):
        chain = {
            "lhs": lhs,
            "t1_abs_average": float(trapezoid(trapezoid(np.abs(ev.commutator), ps, axis=1), xs)) / (2 * L * P),
            "t2_average_abs": float(abs(trapezoid(trapezoid(ev.commutator, ps, axis=1), xs))) / (2 * L * P),
            "t3_volume": hb / 2 * (1 - abs(ev.volume_integral) / (L * P)),
            "t4_flux": hb / 2 * (1 - abs(ev.boundary_flux) / (L * P)),
            "t5_bound": hb / 2 * (1 - 2 * dx / L - 2 * dp / P) if np.isfinite(dx + dp) else -np.inf,
        }
    tol = MARGIN_TOL * hb
    c = chain
    holds = (
        (np.isnan(c["lhs"]) or c["lhs"] >= c["t1_abs_average"] - tol)
        and c["t1_abs_average"] >= c["t2_average_abs"] - tol
        and c["t2_average_abs"] >= c["t3_volume"] - tol
        and abs(c["t3_volume"] - c["t4_flux"]) <= max(tol, ev.discrepancy * hb / (L * P) + tol)
        and c["t4_flux"] >= c["t5_bound"] - tol
    )
    max_v = float(max(np.abs(coarse.v).max(), np.abs(fine.v).max() if fine else 0.0))
    return DivergenceReport(coarse, fine, order, max_v, chain, bool(holds), bool(valid), d)

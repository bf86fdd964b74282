"""Joint distribution of the two pointer readings after the interaction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import GridError, InvalidStateError
from ..gaussian import push_state
from ..models import MU_P, MU_X, POINTER_P, POINTER_X, MeasurementModel, ModeState
from ..modespace import StateVector
from .operators import resolve_backend

MASS_TOL = 1e-3
# the grid must reach this many standard deviations on each side of the mean
HALF_SPAN_SIGMAS = 3.0


@dataclass(frozen=True)
class PointerDistribution:
    """Density of (mu_X, mu_P) on a rectangular grid, plus its moments."""

    mu_x: np.ndarray = field(repr=False)
    mu_p: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    mass: float
    mean: np.ndarray
    cov: np.ndarray
    backend: str


def hermite_functions(n: int, grid: np.ndarray, hbar: float = 1.0) -> np.ndarray:
    """Position wavefunctions of number states 0..n-1, shape (len(grid), n)."""
    u = np.asarray(grid, dtype=float) / np.sqrt(hbar)
    out = np.zeros((u.size, n))
    out[:, 0] = (np.pi * hbar) ** -0.25 * np.exp(-0.5 * u * u)
    if n > 1:
        out[:, 1] = np.sqrt(2.0) * u * out[:, 0]
    for k in range(1, n - 1):
        out[:, k + 1] = np.sqrt(2.0 / (k + 1)) * u * out[:, k] - np.sqrt(k / (k + 1)) * out[:, k - 1]
    return out


def _spacing(grid: np.ndarray) -> float:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 3:
        raise GridError("each grid axis needs at least three points")
    steps = np.diff(g)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps[0]):
        raise GridError("grid axes must be uniform and increasing")
    return float(steps[0])


def _check_cover(grid: np.ndarray, mean: float, std: float, axis: str) -> None:
    lo, hi = mean - HALF_SPAN_SIGMAS * std, mean + HALF_SPAN_SIGMAS * std
    if grid[0] > lo or grid[-1] < hi:
        raise GridError(
            f"{axis} grid [{grid[0]:.3g}, {grid[-1]:.3g}] does not cover [{lo:.3g}, {hi:.3g}] "
            f"({2 * HALF_SPAN_SIGMAS:g} standard deviations)"
        )


def pointer_joint_distribution(
    m: MeasurementModel,
    psi,
    grid: tuple[np.ndarray, np.ndarray],
    backend: str | None = None,
) -> PointerDistribution:
    """Density of the final pointer positions for system input ``psi``.

    ``psi`` is a :class:`ModeState` (either backend) or a system
    :class:`StateVector` / amplitude array (Fock only). The Gaussian result
    is exact; the Fock result integrates the final wavefunction against
    number-state wavefunctions of both pointers and traces out the system.
    """
    backend = resolve_backend(m, backend)
    mu_x, mu_p = (np.asarray(g, dtype=float) for g in grid)
    hx, hp = _spacing(mu_x), _spacing(mu_p)
    if backend == "gaussian":
        if not isinstance(psi, ModeState):
            raise InvalidStateError("the Gaussian backend needs a ModeState input")
        final = push_state(m.symplectic, m.initial_gaussian(psi))
        idx = [MU_X, MU_P]
        mean = final.mean[idx]
        cov = final.cov[np.ix_(idx, idx)]
        for g, k, name in ((mu_x, 0, "mu_X"), (mu_p, 1, "mu_P")):
            _check_cover(g, mean[k], np.sqrt(cov[k, k]), name)
        X, Pm = np.meshgrid(mu_x - mean[0], mu_p - mean[1], indexing="ij")
        inv = np.linalg.inv(cov)
        quad = inv[0, 0] * X * X + 2 * inv[0, 1] * X * Pm + inv[1, 1] * Pm * Pm
        dens = np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))
        mass = float(dens.sum() * hx * hp)
        _check_mass(mass)
        return PointerDistribution(mu_x, mu_p, dens, mass, mean, cov, backend)

    d0, d1, d2 = m.dims
    if isinstance(psi, ModeState):
        sys_vec = psi.fock(d0)
    elif isinstance(psi, StateVector):
        sys_vec = psi.amplitudes
    else:
        sys_vec = np.asarray(psi, dtype=complex)
    if sys_vec.shape != (d0,):
        raise InvalidStateError(f"system state must have length {d0}")
    vecs = m.apparatus_vectors()
    full = np.kron(np.kron(sys_vec, vecs[POINTER_X]), vecs[POINTER_P])
    phi = m.unitary.apply(full).reshape(d0, d1, d2)
    _check_fock_cover(m, phi, mu_x, mu_p)
    Hx = hermite_functions(d1, mu_x, m.hbar)
    Hp = hermite_functions(d2, mu_p, m.hbar)
    amp = np.einsum("im,nmk,jk->nij", Hx, phi, Hp, optimize=True)
    dens = np.sum(np.abs(amp) ** 2, axis=0)
    mass = float(dens.sum() * hx * hp)
    _check_mass(mass)
    X, Pm = np.meshgrid(mu_x, mu_p, indexing="ij")
    w = dens * hx * hp / mass
    mean = np.array([np.sum(w * X), np.sum(w * Pm)])
    dx, dp = X - mean[0], Pm - mean[1]
    cov = np.array([[np.sum(w * dx * dx), np.sum(w * dx * dp)], [np.sum(w * dx * dp), np.sum(w * dp * dp)]])
    return PointerDistribution(mu_x, mu_p, dens, mass, mean, cov, backend)


def _check_fock_cover(m: MeasurementModel, phi: np.ndarray, mu_x: np.ndarray, mu_p: np.ndarray) -> None:
    sp = m.space
    for factor, grid, name in ((POINTER_X, mu_x, "mu_X"), (POINTER_P, mu_p, "mu_P")):
        x = sp.factors[factor].x_op
        red = np.moveaxis(phi, factor, 0).reshape(phi.shape[factor], -1)
        rho = red @ red.conj().T
        mean = float(np.real(np.trace(rho @ x)))
        var = float(np.real(np.trace(rho @ x @ x))) - mean**2
        _check_cover(grid, mean, np.sqrt(max(var, 0.0)), name)


def _check_mass(mass: float) -> None:
    if abs(mass - 1.0) > MASS_TOL:
        raise GridError(f"grid quadrature mass {mass:.6f} differs from 1 by more than {MASS_TOL}")

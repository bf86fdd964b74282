"""Exact first- and second-moment backend for quadratic dynamics.

Phase-space vectors use the ordering (x1, p1, x2, p2, ...). A generator
``H = 1/2 r^T G r + h^T r`` acting for time ``t`` sends the Heisenberg
quadratures to ``S r + shift`` with ``S = exp(Omega G t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag, expm

from .exceptions import InvalidDimensionError, InvalidStateError

SYMPLECTIC_TOL = 1e-10
PHYSICAL_TOL = 1e-10


def omega(modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with blocks [[0, 1], [-1, 0]]."""
    return block_diag(*([np.array([[0.0, 1.0], [-1.0, 0.0]])] * modes)) if modes else np.zeros((0, 0))


def _modes_of(n: int) -> int:
    if n % 2:
        raise InvalidDimensionError(f"phase-space dimension must be even, got {n}")
    return n // 2


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an M-mode Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise InvalidDimensionError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        _modes_of(mean.size)
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
            raise InvalidStateError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        heis = cov + 0.5j * self.hbar * omega(mean.size // 2)
        lowest = np.linalg.eigvalsh(heis).min() if mean.size else 0.0
        if lowest < -PHYSICAL_TOL:
            raise InvalidStateError(f"covariance violates the uncertainty principle (eigenvalue {lowest:.3e})")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def modes(self) -> int:
        return self.mean.size // 2

    @classmethod
    def vacuum(cls, modes: int, hbar: float = 1.0) -> "GaussianState":
        return cls(np.zeros(2 * modes), 0.5 * hbar * np.eye(2 * modes), hbar)

    def std(self) -> np.ndarray:
        """Standard deviations of all quadratures."""
        return np.sqrt(np.diag(self.cov))


def product_state(states: list[GaussianState]) -> GaussianState:
    """Tensor product of Gaussian states in the given mode order."""
    hbars = {g.hbar for g in states}
    if len(hbars) != 1:
        raise InvalidStateError("all factors must share hbar")
    return GaussianState(
        np.concatenate([g.mean for g in states]),
        block_diag(*[g.cov for g in states]),
        hbars.pop(),
    )


def single_mode(x0: float = 0.0, p0: float = 0.0, var_x: float | None = None, hbar: float = 1.0) -> GaussianState:
    """Minimum-uncertainty state; ``var_x`` defaults to the vacuum value hbar/2."""
    if var_x is None:
        var_x = hbar / 2.0
    if var_x <= 0:
        raise InvalidStateError("position variance must be positive")
    return GaussianState([x0, p0], np.diag([var_x, hbar**2 / (4.0 * var_x)]), hbar)


@dataclass(frozen=True, eq=False)
class SymplecticModel:
    """Affine symplectic map ``r -> S r + shift``."""

    S: np.ndarray
    shift: np.ndarray = field(default=None)

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        n = S.shape[0]
        if S.shape != (n, n):
            raise InvalidDimensionError("S must be square")
        shift = np.zeros(n) if self.shift is None else np.asarray(self.shift, dtype=float).reshape(-1)
        if shift.size != n:
            raise InvalidDimensionError("shift length does not match S")
        om = omega(_modes_of(n))
        defect = np.max(np.abs(S @ om @ S.T - om)) if n else 0.0
        if defect > SYMPLECTIC_TOL:
            raise ValueError(f"matrix is not symplectic (defect {defect:.3e})")
        S.setflags(write=False)
        shift.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "shift", shift)

    @property
    def modes(self) -> int:
        return self.S.shape[0] // 2

    @classmethod
    def identity(cls, modes: int) -> "SymplecticModel":
        return cls(np.eye(2 * modes))


@dataclass(frozen=True, eq=False)
class QuadForm:
    """The observable ``c . r + c0``."""

    linear: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.linear, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "linear", c)
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def quadrature(cls, n: int, index: int, coef: float = 1.0) -> "QuadForm":
        c = np.zeros(n)
        c[index] = coef
        return cls(c)

    def __add__(self, other):
        if isinstance(other, QuadForm):
            if other.linear.size != self.linear.size:
                raise InvalidDimensionError("quadratic forms of different length")
            return QuadForm(self.linear + other.linear, self.constant + other.constant)
        if np.isscalar(other):
            return QuadForm(self.linear, self.constant + float(other))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return QuadForm(-self.linear, -self.constant)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return QuadForm(self.linear * scalar, self.constant * scalar)

    __rmul__ = __mul__


def tidy(S: np.ndarray, rel: float = 1e-14) -> np.ndarray:
    """Zero out entries that are pure roundoff relative to the largest entry.

    Rotations by pi/2 leave cos(pi/2) ~ 6e-17 behind; chopping keeps exact
    zeros exact.
    """
    S = np.array(S, dtype=float)
    scale = np.max(np.abs(S)) if S.size else 0.0
    S[np.abs(S) < rel * scale] = 0.0
    return S


def symplectic_from_quadratic(coupling: np.ndarray, t: float = 1.0) -> SymplecticModel:
    """``S = exp(Omega G t)`` for the generator ``H = 1/2 r^T G r``."""
    return affine_from_quadratic(coupling, None, t)


def affine_from_quadratic(coupling: np.ndarray, linear: np.ndarray | None, t: float = 1.0) -> SymplecticModel:
    """Affine map for ``H = 1/2 r^T G r + h^T r`` via the augmented exponential."""
    G = np.asarray(coupling, dtype=float)
    n = G.shape[0]
    if G.shape != (n, n):
        raise InvalidDimensionError("coupling matrix must be square")
    if not np.allclose(G, G.T, atol=1e-12, rtol=0):
        raise ValueError("coupling matrix must be symmetric")
    om = omega(_modes_of(n))
    h = np.zeros(n) if linear is None else np.asarray(linear, dtype=float)
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = om @ G
    aug[:n, n] = om @ h
    E = expm(aug * t)
    return SymplecticModel(tidy(E[:n, :n]), tidy(E[:n, n]) if np.any(h) else np.zeros(n))


def compose(first: SymplecticModel, second: SymplecticModel) -> SymplecticModel:
    """Heisenberg map of applying ``first`` then ``second``."""
    if first.S.shape != second.S.shape:
        raise InvalidDimensionError("cannot compose maps of different size")
    return SymplecticModel(second.S @ first.S, second.S @ first.shift + second.shift)


def push_state(m: SymplecticModel, g: GaussianState) -> GaussianState:
    """Evolve a state: mean -> S mean + shift, cov -> S cov S^T."""
    if m.S.shape[0] != g.mean.size:
        raise InvalidDimensionError(f"model acts on {m.modes} modes, state has {g.modes}")
    return GaussianState(m.S @ g.mean + m.shift, m.S @ g.cov @ m.S.T, g.hbar)


def heisenberg_form(q: QuadForm, m: SymplecticModel) -> QuadForm:
    """Heisenberg-evolved observable: ``c.(S r + shift) + c0``."""
    if q.linear.size != m.S.shape[0]:
        raise InvalidDimensionError("form and model have different sizes")
    return QuadForm(m.S.T @ q.linear, float(q.linear @ m.shift) + q.constant)


def first_moment(q: QuadForm, g: GaussianState) -> float:
    if q.linear.size != g.mean.size:
        raise InvalidDimensionError("form and state have different sizes")
    return float(q.linear @ g.mean + q.constant)


def second_moment(q: QuadForm, g: GaussianState) -> float:
    """``<(c.r + c0)^2> = c^T cov c + (c^T mean + c0)^2``."""
    mu = first_moment(q, g)
    return float(q.linear @ g.cov @ q.linear + mu * mu)


def cross_moment(q1: QuadForm, q2: QuadForm, g: GaussianState) -> float:
    """Symmetrized ``<(A B + B A)/2>`` for two linear observables."""
    return float(q1.linear @ g.cov @ q2.linear + first_moment(q1, g) * first_moment(q2, g))

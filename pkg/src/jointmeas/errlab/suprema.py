"""Maximal rms errors: spectral suprema and range-constrained suprema."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from ..exceptions import InfeasibleError
from ..gaussian import QuadForm
from ..models import SYSTEM, MeasurementModel, ModeState
from ..modespace import make_mode
from .moments import gaussian_split, partial_expectation
from .operators import SELECTORS, error_forms, lift, resolve_backend, squared_operator

# growth of the last refinement step, relative to the value, that signals an unbounded supremum
GROWTH_THRESHOLD = 0.10
FEASIBILITY_TOL = 1e-8
TIE_TOL = 1e-12
N_STARTS = 20
MAX_ITER = 500
# cap on the automatically chosen system truncation for constrained searches
MAX_AUTO_DIM = 160


@dataclass(frozen=True)
class RmsValue:
    """A maximal rms error; ``value`` is ``inf`` when ``infinite`` is set.

    ``samples`` holds the (system dim, truncated supremum) pairs used by the
    Fock refinement test.
    """

    value: float
    infinite: bool
    backend: str
    samples: tuple = ()

    def __float__(self) -> float:
        return self.value


def _form(which: str, m: MeasurementModel) -> QuadForm:
    if which not in SELECTORS:
        raise KeyError(f"unknown error operator {which!r}; expected one of {SELECTORS}")
    return error_forms(m)[which]


def system_moment_operator(q: QuadForm, m: MeasurementModel, system_dim: int | None = None) -> np.ndarray:
    """Matrix of the partial expectation of ``q^2`` on the truncated system."""
    dims = list(m.dims)
    if system_dim is not None:
        dims[SYSTEM] = int(system_dim)
    space = m.space.with_dims(dims)
    A = partial_expectation(squared_operator(q, space), m).entries
    return 0.5 * (A + A.conj().T)


def system_mean_operator(q: QuadForm, m: MeasurementModel, system_dim: int | None = None) -> np.ndarray:
    dims = list(m.dims)
    if system_dim is not None:
        dims[SYSTEM] = int(system_dim)
    A = partial_expectation(lift(q, m.space.with_dims(dims)), m).entries
    return 0.5 * (A + A.conj().T)


def refinement_dims(d: int) -> tuple[int, int, int]:
    return (d, int(round(4 * d / 3)), int(round(5 * d / 3)))


def grows_without_bound(values: Sequence[float]) -> bool:
    """Strictly increasing with a last increment above ``GROWTH_THRESHOLD`` of the last value."""
    v = list(values)
    increasing = all(b > a for a, b in zip(v, v[1:]))
    return increasing and (v[-1] - v[-2]) > GROWTH_THRESHOLD * v[-1]


def maximal_rms(
    which: str,
    m: MeasurementModel,
    backend: str | None = None,
    dims_sequence: Sequence[int] | None = None,
) -> RmsValue:
    """Supremum over all system states of the rms of an error operator.

    Gaussian: unbounded exactly when the operator has a system component,
    otherwise the apparatus rms. Fock: square root of the top eigenvalue of
    the partial expectation of the squared operator, with the system
    truncation refined over ``dims_sequence`` to detect unbounded growth.
    """
    q = _form(which, m)
    backend = resolve_backend(m, backend)
    if backend == "gaussian":
        s, _, K = gaussian_split(q, m)
        if np.max(np.abs(s)) > 1e-12 * max(1.0, np.max(np.abs(q.linear))):
            return RmsValue(np.inf, True, backend)
        return RmsValue(float(np.sqrt(max(K, 0.0))), False, backend)
    seq = tuple(dims_sequence) if dims_sequence is not None else refinement_dims(m.dims[SYSTEM])
    samples = []
    for d in seq:
        lam = np.linalg.eigvalsh(system_moment_operator(q, m, d))[-1]
        samples.append((int(d), float(np.sqrt(max(lam, 0.0)))))
    values = [v for _, v in samples]
    if len(values) >= 3 and grows_without_bound(values):
        return RmsValue(np.inf, True, backend, tuple(samples))
    return RmsValue(values[0], False, backend, tuple(samples))


@dataclass(frozen=True)
class RangeBox:
    """Operating range: means inside a box, spreads capped by sigma and tau."""

    x0: float
    p0: float
    L: float
    P: float
    sigma: float
    tau: float
    hbar: float = 1.0

    def __post_init__(self):
        if min(self.L, self.P, self.sigma, self.tau) <= 0:
            raise ValueError("box sides and spread caps must be positive")
        if self.sigma * self.tau < self.hbar / 2.0 * (1 - 1e-12):
            raise ValueError(f"sigma * tau = {self.sigma * self.tau} is below hbar/2")

    def corners(self) -> list[tuple[float, float]]:
        hx, hp = self.L / 2.0, self.P / 2.0
        return [
            (self.x0 - hx, self.p0 - hp),
            (self.x0 + hx, self.p0 - hp),
            (self.x0 - hx, self.p0 + hp),
            (self.x0 + hx, self.p0 + hp),
        ]

    def contains(self, other: "RangeBox") -> bool:
        return (
            other.x0 - other.L / 2 >= self.x0 - self.L / 2 - 1e-15
            and other.x0 + other.L / 2 <= self.x0 + self.L / 2 + 1e-15
            and other.p0 - other.P / 2 >= self.p0 - self.P / 2 - 1e-15
            and other.p0 + other.P / 2 <= self.p0 + self.P / 2 + 1e-15
            and other.sigma <= self.sigma
            and other.tau <= self.tau
        )

    def max_photons(self) -> float:
        """Upper bound on the mean photon number of any state in the range."""
        x = abs(self.x0) + self.L / 2
        p = abs(self.p0) + self.P / 2
        return (x * x + p * p + self.sigma**2 + self.tau**2) / (2 * self.hbar) - 0.5

    def seed_var_x(self) -> float:
        """Position variance of a minimum-uncertainty state that meets both caps with slack."""
        return self.sigma * self.hbar / (2.0 * self.tau)


@dataclass(frozen=True)
class ConstrainedResult:
    """Best value found for a range-constrained supremum.

    ``certified`` is ``"exact"`` for the closed-form Gaussian evaluation and
    ``"lower_bound"`` for the Fock search, which can confirm but never refute
    an inequality of the form ``sup >= bound``.
    """

    value: float
    certified: str
    state: np.ndarray | None = field(default=None, repr=False)
    violation: float = 0.0
    start_index: int = -1
    n_feasible: int = 0


def auto_system_dim(m: MeasurementModel, box: RangeBox) -> int:
    need = int(np.ceil(4 * box.max_photons())) + 8
    return int(min(max(m.dims[SYSTEM], need), max(MAX_AUTO_DIM, m.dims[SYSTEM])))


def constrained_maximal_rms(
    which: str,
    m: MeasurementModel,
    box: RangeBox,
    backend: str | None = None,
    seed: int = 0,
    system_dim: int | None = None,
    n_starts: int = N_STARTS,
    warm_starts: Sequence[np.ndarray] = (),
) -> ConstrainedResult:
    """Supremum of the rms error over states whose means and spreads lie in ``box``.

    The Gaussian backend evaluates the supremum in closed form: the squared
    rms depends only on the first and second system moments, and the
    Robertson-Schroedinger bound caps the covariance term. The Fock backend
    runs a deterministic multi-start SLSQP search and returns the best
    feasible value, always a lower bound.
    """
    q = _form(which, m)
    backend = resolve_backend(m, backend)
    if backend == "gaussian":
        return ConstrainedResult(float(np.sqrt(max(_gaussian_constrained_sq(q, m, box), 0.0))), "exact")
    d = system_dim or auto_system_dim(m, box)
    A = system_moment_operator(q, m, d)
    return _fock_constrained(A, box, d, np.random.default_rng(seed), n_starts, warm_starts)


def _gaussian_constrained_sq(q: QuadForm, m: MeasurementModel, box: RangeBox) -> float:
    s, B, K = gaussian_split(q, m)
    cross = np.sqrt(max(box.sigma**2 * box.tau**2 - box.hbar**2 / 4.0, 0.0))
    spread = s[0] ** 2 * box.sigma**2 + s[1] ** 2 * box.tau**2 + 2 * abs(s[0] * s[1]) * cross
    best_mean = max((s[0] * x + s[1] * p + B) ** 2 for x, p in box.corners())
    return best_mean + K - B**2 + spread


def _realify(M: np.ndarray) -> np.ndarray:
    """Real symmetric matrix with ``z^T R z = <psi|M|psi>`` for ``psi = z[:d] + i z[d:]``."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


class _Problem:
    """Objective and constraints in the real embedding of the system vector."""

    def __init__(self, A: np.ndarray, box: RangeBox, d: int):
        big = make_mode(d + 1, box.hbar)
        mode = make_mode(d, box.hbar)
        self.box = box
        self.d = d
        self.A = _realify(A)
        self.X = _realify(mode.x_op)
        self.P = _realify(mode.p_op)
        self.X2 = _realify((big.x_op @ big.x_op)[:d, :d])
        self.P2 = _realify((big.p_op @ big.p_op)[:d, :d])

    @staticmethod
    def _quot(M, z):
        n2 = z @ z
        v = (z @ M @ z) / n2
        return v, 2.0 * (M @ z - v * z) / n2

    def objective(self, z):
        v, g = self._quot(self.A, z)
        return -v, -g

    def constraints(self, z):
        b = self.box
        x, gx = self._quot(self.X, z)
        p, gp = self._quot(self.P, z)
        x2, gx2 = self._quot(self.X2, z)
        p2, gp2 = self._quot(self.P2, z)
        vals = np.array([
            x - (b.x0 - b.L / 2),
            (b.x0 + b.L / 2) - x,
            p - (b.p0 - b.P / 2),
            (b.p0 + b.P / 2) - p,
            b.sigma**2 - (x2 - x * x),
            b.tau**2 - (p2 - p * p),
        ])
        jac = np.array([gx, -gx, gp, -gp, -(gx2 - 2 * x * gx), -(gp2 - 2 * p * gp)])
        return vals, jac

    def violation(self, z) -> float:
        return float(max(0.0, -self.constraints(z)[0].min()))

    def value(self, z) -> float:
        return float(-self.objective(z)[0])


def _seed_vectors(box: RangeBox, d: int, rng: np.random.Generator, n_starts: int) -> list[np.ndarray]:
    var0 = box.seed_var_x()
    points = box.corners() + [(box.x0, box.p0)]
    seeds = [(x, p, var0) for x, p in points]
    lo, hi = np.log(box.hbar**2 / (4 * box.tau**2)), np.log(box.sigma**2)
    while len(seeds) < n_starts:
        x = box.x0 + box.L * (rng.random() - 0.5)
        p = box.p0 + box.P * (rng.random() - 0.5)
        seeds.append((x, p, float(np.exp(lo + (hi - lo) * rng.random()))))
    out = []
    for x, p, v in seeds[:n_starts]:
        psi = ModeState(x, p, v, box.hbar).fock(d)
        out.append(np.concatenate([psi.real, psi.imag]))
    return out


def _fock_constrained(
    A: np.ndarray,
    box: RangeBox,
    d: int,
    rng: np.random.Generator,
    n_starts: int,
    warm_starts: Sequence[np.ndarray],
) -> ConstrainedResult:
    prob = _Problem(A, box, d)
    starts = _seed_vectors(box, d, rng, n_starts)
    for w in warm_starts:
        w = np.asarray(w, dtype=complex)
        if w.size < d:
            w = np.concatenate([w, np.zeros(d - w.size)])
        starts.append(np.concatenate([w[:d].real, w[:d].imag]))
    cons = [
        {"type": "ineq", "fun": lambda z: prob.constraints(z)[0], "jac": lambda z: prob.constraints(z)[1]},
        {"type": "eq", "fun": lambda z: np.array([z @ z - 1.0]), "jac": lambda z: (2.0 * z)[None, :]},
    ]
    candidates = []  # (value, index, vector, violation)
    for i, z0 in enumerate(starts):
        z0 = z0 / np.linalg.norm(z0)
        for z in (z0, _optimize(prob, z0, cons)):
            if z is None:
                continue
            z = z / np.linalg.norm(z)
            viol = prob.violation(z)
            if viol <= FEASIBILITY_TOL:
                candidates.append((prob.value(z), i, z, viol))
    if not candidates:
        raise InfeasibleError("no feasible state found in the truncated system space")
    top = max(c[0] for c in candidates)
    best = min((c for c in candidates if c[0] >= top - TIE_TOL), key=lambda c: c[1])
    value, index, z, viol = best
    psi = z[:d] + 1j * z[d:]
    return ConstrainedResult(float(np.sqrt(max(value, 0.0))), "lower_bound", psi, viol, index, len(candidates))


def _optimize(prob: _Problem, z0: np.ndarray, cons) -> np.ndarray | None:
    res = minimize(
        prob.objective,
        z0,
        jac=True,
        method="SLSQP",
        constraints=cons,
        options={"maxiter": MAX_ITER, "ftol": 1e-12},
    )
    z = res.x
    return z if np.all(np.isfinite(z)) and np.linalg.norm(z) > 0 else None


@dataclass(frozen=True)
class Defects:
    """Operator norms of the partial expectations of the four error operators."""

    Xi: float
    Pi: float
    Xf: float
    Pf: float

    def as_dict(self) -> dict[str, float]:
        return {"defect_Xi": self.Xi, "defect_Pi": self.Pi, "defect_Xf": self.Xf, "defect_Pf": self.Pf}

    def max(self) -> float:
        return max(self.Xi, self.Pi, self.Xf, self.Pf)


def unbiasedness_defect(m: MeasurementModel, backend: str | None = None) -> Defects:
    """How far each error channel is from being uniformly unbiased.

    Gaussian: infinite when the error has a system component (its mean then
    follows the input state), otherwise the constant apparatus mean. Fock:
    spectral norm of the truncated partial expectation.
    """
    backend = resolve_backend(m, backend)
    forms = error_forms(m)
    out = {}
    for key in ("eps_Xi", "eps_Pi", "eps_Xf", "eps_Pf"):
        q = forms[key]
        if backend == "gaussian":
            s, B, _ = gaussian_split(q, m)
            out[key] = np.inf if np.max(np.abs(s)) > 1e-12 * max(1.0, np.max(np.abs(q.linear))) else abs(B)
        else:
            out[key] = float(np.linalg.norm(system_mean_operator(q, m), 2))
    return Defects(out["eps_Xi"], out["eps_Pi"], out["eps_Xf"], out["eps_Pf"])

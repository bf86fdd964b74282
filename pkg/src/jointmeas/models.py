"""Catalog of measurement processes: system mode plus two pointer modes.

Every model is a sequence of quadratic stages ``H = 1/2 r^T G r + h^T r``
applied for unit time, so it has both an exact affine symplectic form and a
truncated Fock unitary. Factor 0 is the system, factor 1 the X pointer
(mu_X, pi_X) and factor 2 the P pointer (mu_P, pi_P).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .exceptions import InvalidDimensionError, InvalidModelError, InvalidStateError
from .gaussian import (
    GaussianState,
    SymplecticModel,
    affine_from_quadratic,
    compose,
    product_state,
    single_mode,
)
from .kronalg import KronSum
from .modespace import (
    CompositeSpace,
    OperatorMatrix,
    composite,
    evolve_unitary,
    ladder,
)

SYSTEM, POINTER_X, POINTER_P = 0, 1, 2
N_MODES = 3
BACKENDS = ("fock", "gaussian", "both")

# phase-space indices in (x, p, mu_X, pi_X, mu_P, pi_P)
X, P, MU_X, PI_X, MU_P, PI_P = range(6)


@dataclass(frozen=True)
class ModeState:
    """Minimum-uncertainty Gaussian state of one mode.

    ``var_x`` defaults to the vacuum value hbar/2; the momentum variance is
    fixed by ``var_x * var_p = hbar^2 / 4``.
    """

    x0: float = 0.0
    p0: float = 0.0
    var_x: float | None = None
    hbar: float = 1.0

    def __post_init__(self):
        if self.var_x is None:
            object.__setattr__(self, "var_x", self.hbar / 2.0)
        if not self.var_x > 0:
            raise InvalidStateError(f"position variance must be positive, got {self.var_x}")

    @property
    def var_p(self) -> float:
        return self.hbar**2 / (4.0 * self.var_x)

    @property
    def mean_photons(self) -> float:
        return (self.x0**2 + self.p0**2 + self.var_x + self.var_p) / (2.0 * self.hbar) - 0.5

    def gaussian(self) -> GaussianState:
        return single_mode(self.x0, self.p0, self.var_x, self.hbar)

    def fock(self, dim: int, pad: int | None = None) -> np.ndarray:
        """Number-basis amplitudes truncated to ``dim`` levels and renormalized.

        The state ``D(alpha) S(r)|0>`` is built by exponentiating the
        generators in a padded space, then cut down.
        """
        if pad is None:
            pad = max(dim, 40)
        n = dim + pad
        a = ladder(n)
        ad = a.conj().T
        vac = np.zeros(n, dtype=complex)
        vac[0] = 1.0
        r = -0.5 * np.log(2.0 * self.var_x / self.hbar)
        vec = vac
        if r != 0.0:
            vec = expm(0.5 * r * (a @ a - ad @ ad)) @ vec
        alpha = (self.x0 + 1j * self.p0) / np.sqrt(2.0 * self.hbar)
        if alpha != 0:
            vec = expm(alpha * ad - np.conj(alpha) * a) @ vec
        vec = vec[:dim]
        return vec / np.linalg.norm(vec)

    def truncation_loss(self, dim: int) -> float:
        """Probability weight above level ``dim - 1`` before renormalization."""
        full = self.fock(dim + 60, pad=60)
        return float(np.sum(np.abs(full[dim:]) ** 2))


@dataclass(frozen=True, eq=False)
class Stage:
    """One quadratic evolution step on the full phase space."""

    G: np.ndarray
    h: np.ndarray = field(default=None)
    label: str = ""

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        h = np.zeros(G.shape[0]) if self.h is None else np.asarray(self.h, dtype=float)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    def symplectic(self) -> SymplecticModel:
        return affine_from_quadratic(self.G, self.h, 1.0)

    def generator(self, space: CompositeSpace) -> OperatorMatrix:
        """``1/2 sum G_ij r_i r_j + sum h_i r_i`` on truncated quadratures."""
        r = [space.quadrature(i) for i in range(2 * len(space.factors))]
        H = OperatorMatrix(space, kron=KronSum(space.dims))
        n = self.G.shape[0]
        for i in range(n):
            if self.h[i]:
                H = H + float(self.h[i]) * r[i]
            for j in range(n):
                if self.G[i, j]:
                    H = H + 0.5 * float(self.G[i, j]) * (r[i] @ r[j])
        return H


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """A measurement process with a fixed initial apparatus state.

    ``pointers`` holds the initial states of the X and P pointer modes.
    ``pointer_map`` names the factor carrying each pointer observable.
    """

    name: str
    space: CompositeSpace
    stages: tuple[Stage, ...]
    pointers: tuple[ModeState, ModeState]
    backend: str = "both"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise InvalidModelError(f"unknown backend {self.backend!r}")
        if len(self.space.factors) != N_MODES:
            raise InvalidDimensionError("catalog models use exactly three modes")
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def hbar(self) -> float:
        return self.space.hbar

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    @property
    def pointer_map(self) -> dict[str, int]:
        return {"mu_X": self.space.index_of("pointerX"), "mu_P": self.space.index_of("pointerP")}

    @cached_property
    def symplectic(self) -> SymplecticModel:
        maps = [s.symplectic() for s in self.stages]
        return reduce(compose, maps, SymplecticModel.identity(N_MODES))

    @cached_property
    def unitary(self) -> OperatorMatrix:
        """Truncated Fock unitary, later stages to the left."""
        U = OperatorMatrix.identity(self.space)
        for stage in self.stages:
            U = evolve_unitary(stage.generator(self.space), 1.0) @ U
        return U

    def apparatus_vectors(self, dims: Sequence[int] | None = None) -> dict[int, np.ndarray]:
        dims = self.dims if dims is None else tuple(dims)
        px, pp = self.pointers
        return {POINTER_X: px.fock(dims[POINTER_X]), POINTER_P: pp.fock(dims[POINTER_P])}

    def apparatus_gaussian(self) -> GaussianState:
        return product_state([p.gaussian() for p in self.pointers])

    def initial_gaussian(self, system: ModeState) -> GaussianState:
        return product_state([system.gaussian()] + [p.gaussian() for p in self.pointers])

    def resized(self, dims: Sequence[int]) -> "MeasurementModel":
        """Same process on a different truncation."""
        return MeasurementModel(
            self.name, self.space.with_dims(dims), self.stages, self.pointers, self.backend, dict(self.params)
        )


def _dims3(dims) -> tuple[int, int, int]:
    if np.isscalar(dims):
        dims = (int(dims),) * N_MODES
    dims = tuple(int(d) for d in dims)
    if len(dims) != N_MODES:
        raise InvalidDimensionError(f"expected three dims, got {dims}")
    if min(dims) < 2:
        raise InvalidDimensionError(f"all dims must be >= 2, got {dims}")
    return dims


def _bilinear(pairs: Sequence[tuple[int, int, float]]) -> np.ndarray:
    G = np.zeros((2 * N_MODES, 2 * N_MODES))
    for i, j, c in pairs:
        G[i, j] += c
        G[j, i] += c
    return G


def arthurs_kelly(
    coupling: float = 1.0,
    pointer_squeeze: float = 1.0,
    dims=12,
    hbar: float = 1.0,
    backend: str = "both",
) -> MeasurementModel:
    """Impulsive joint measurement ``H = kappa (x pi_X + p pi_P)`` for unit time.

    The X pointer starts with ``Var mu_X = s hbar / 4`` and the P pointer with
    ``Var mu_P = hbar / (4 s)``, both minimum-uncertainty and centered. At
    ``kappa = 1`` the retrodictive errors are ``s hbar / 2`` and
    ``hbar / (2 s)`` for every input state.
    """
    if coupling == 0:
        raise InvalidModelError("coupling must be nonzero")
    if not pointer_squeeze > 0:
        raise InvalidModelError(f"pointer squeeze must be positive, got {pointer_squeeze}")
    dims = _dims3(dims)
    s = float(pointer_squeeze)
    G = _bilinear([(X, PI_X, coupling), (P, PI_P, coupling)])
    pointers = (ModeState(var_x=s * hbar / 4.0, hbar=hbar), ModeState(var_x=hbar / (4.0 * s), hbar=hbar))
    return MeasurementModel(
        "arthurs_kelly",
        composite(dims, hbar),
        (Stage(G, label="coupling"),),
        pointers,
        backend,
        {"coupling": float(coupling), "pointer_squeeze": s},
    )


def swap_rotation_model(
    dims=12,
    hbar: float = 1.0,
    pointer_p_mean: float = 0.0,
    pointer_p_var: float | None = None,
    backend: str = "both",
) -> MeasurementModel:
    """Quarter rotation ``exp[-(i pi / 2 hbar)(x pi_X - mu_X p)]`` of (x, p) into pointer X.

    The P pointer is left alone; its mean and position variance are
    configurable so the stuck-needle scenario can be tuned.
    """
    dims = _dims3(dims)
    half_pi = np.pi / 2.0
    G = _bilinear([(X, PI_X, half_pi), (P, MU_X, -half_pi)])
    pointers = (
        ModeState(hbar=hbar),
        ModeState(x0=pointer_p_mean, var_x=pointer_p_var if pointer_p_var is not None else hbar / 2.0, hbar=hbar),
    )
    return MeasurementModel(
        "swap_rotation",
        composite(dims, hbar),
        (Stage(G, label="rotation"),),
        pointers,
        backend,
        {"pointer_p_mean": float(pointer_p_mean), "pointer_p_var": pointers[1].var_x},
    )


def identity_model(dims=12, hbar: float = 1.0) -> MeasurementModel:
    """No interaction; vacuum pointers."""
    dims = _dims3(dims)
    return MeasurementModel("identity", composite(dims, hbar), (), (ModeState(hbar=hbar), ModeState(hbar=hbar)))


def _pointer_affine_stages(mode: int, gain: float, offset: float) -> list[Stage]:
    """Stages sending the pointer position mu -> gain * mu + offset."""
    mu, pi = 2 * mode, 2 * mode + 1
    stages = []
    if abs(gain) != 1.0:
        stages.append(Stage(_bilinear([(mu, pi, np.log(abs(gain)))]), label="gain"))
    if gain < 0:
        G = np.zeros((2 * N_MODES, 2 * N_MODES))
        G[mu, mu] = G[pi, pi] = np.pi
        stages.append(Stage(G, label="flip"))
    if offset != 0.0:
        h = np.zeros(2 * N_MODES)
        h[pi] = offset
        stages.append(Stage(np.zeros((2 * N_MODES, 2 * N_MODES)), h, label="offset"))
    return stages


def biased_variant(
    base: MeasurementModel,
    gain_x: float = 1.0,
    offset_x: float = 0.0,
    gain_p: float = 1.0,
    offset_p: float = 0.0,
) -> MeasurementModel:
    """Miscalibrated readout: after ``base``, mu_X -> gain_x mu_X + offset_x and likewise for P."""
    if gain_x == 0 or gain_p == 0:
        raise InvalidModelError("pointer gains must be nonzero")
    stages = list(base.stages)
    stages += _pointer_affine_stages(POINTER_X, gain_x, offset_x)
    stages += _pointer_affine_stages(POINTER_P, gain_p, offset_p)
    params = dict(base.params)
    params.update(gain_x=float(gain_x), offset_x=float(offset_x), gain_p=float(gain_p), offset_p=float(offset_p))
    return MeasurementModel("biased:" + base.name, base.space, tuple(stages), base.pointers, base.backend, params)


_BASES = {
    "arthurs_kelly": (arthurs_kelly, {"coupling", "pointer_squeeze"}),
    "swap_rotation": (swap_rotation_model, {"pointer_p_mean", "pointer_p_var"}),
    "identity": (identity_model, set()),
}
_BIAS_KEYS = {"gain_x", "offset_x", "gain_p", "offset_p"}

CATALOG = tuple(_BASES) + tuple("biased:" + b for b in _BASES)


def build_model(name: str, dims=12, hbar: float = 1.0, backend: str = "both", **params) -> MeasurementModel:
    """Look up a model by catalog name and build it.

    Names are ``arthurs_kelly``, ``swap_rotation``, ``identity`` or
    ``biased:<base>``. Unknown parameter names are rejected.
    """
    biased = name.startswith("biased:")
    base_name = name[len("biased:"):] if biased else name
    if base_name not in _BASES:
        raise InvalidModelError(f"unknown model {name!r}; known: {', '.join(CATALOG)}")
    ctor, keys = _BASES[base_name]
    allowed = keys | (_BIAS_KEYS if biased else set())
    unknown = set(params) - allowed
    if unknown:
        raise InvalidModelError(f"unknown parameters for {name}: {sorted(unknown)}")
    base_kw = {k: v for k, v in params.items() if k in keys}
    kwargs = dict(dims=dims, hbar=hbar, **base_kw)
    if base_name != "identity":
        kwargs["backend"] = backend
    model = ctor(**kwargs)
    if biased:
        model = biased_variant(model, **{k: v for k, v in params.items() if k in _BIAS_KEYS})
    return model

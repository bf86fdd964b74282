"""Truncated Fock representation of bosonic modes and their tensor products.

A mode keeps the first ``dim`` number states. Quadratures are built from the
truncated ladder matrix, so the canonical commutator holds on every level
except the top one, where it picks up the known artifact ``-i hbar (dim-1)``.

Operators on a composite space are stored either densely or as a
:class:`~jointmeas.kronalg.KronSum`; the dense matrix is formed only when
something asks for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    HermiticityError,
    InvalidDimensionError,
    InvalidStateError,
    SpaceMismatchError,
)
from .kronalg import KronSum

ROLES = ("system", "pointerX", "pointerP", "auxiliary")

HERMITIAN_TOL = 1e-10
NORM_TOL = 1e-12

# above this size residual norms fall back to a cheap upper bound
EXACT_NORM_MAX_DIM = 400


def ladder(dim: int) -> np.ndarray:
    """Annihilation matrix with ``a|k> = sqrt(k)|k-1>``."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


@dataclass(frozen=True, eq=False)
class ModeSpace:
    """A single truncated bosonic mode."""

    dim: int
    hbar: float
    x_op: np.ndarray = field(repr=False)
    p_op: np.ndarray = field(repr=False)

    @property
    def number_op(self) -> np.ndarray:
        return np.diag(np.arange(self.dim, dtype=float)).astype(complex)

    def same_as(self, other: "ModeSpace") -> bool:
        return self.dim == other.dim and self.hbar == other.hbar


def make_mode(dim: int, hbar: float = 1.0) -> ModeSpace:
    """Build the quadratures ``x = sqrt(hbar/2)(a + a+)`` and ``p = i sqrt(hbar/2)(a+ - a)``."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"mode dimension must be an integer >= 2, got {dim}")
    return _mode(int(dim), hbar)


def _mode(dim: int, hbar: float) -> ModeSpace:
    # compressions may legitimately leave a single level
    if dim < 1:
        raise InvalidDimensionError(f"mode dimension must be positive, got {dim}")
    if not hbar > 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    a = ladder(dim)
    scale = np.sqrt(hbar / 2.0)
    x = scale * (a + a.conj().T)
    p = 1j * scale * (a.conj().T - a)
    x.setflags(write=False)
    p.setflags(write=False)
    return ModeSpace(dim, float(hbar), x, p)


@dataclass(frozen=True, eq=False)
class CompositeSpace:
    """Ordered tensor product of modes with a role for each factor.

    ``roles`` maps factor index to one of ``system``, ``pointerX``,
    ``pointerP`` or ``auxiliary``. Exactly one factor is the system and the
    two pointer roles may each appear at most once.
    """

    factors: tuple[ModeSpace, ...]
    roles: Mapping[int, str]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "roles", dict(self.roles))
        if not self.factors:
            raise InvalidDimensionError("a composite space needs at least one factor")
        if len({f.hbar for f in self.factors}) != 1:
            raise ValueError("all factors must share the same hbar")
        for k, role in self.roles.items():
            if not 0 <= k < len(self.factors):
                raise ValueError(f"role assigned to missing factor {k}")
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        names = list(self.roles.values())
        if names.count("system") != 1:
            raise ValueError("exactly one factor must have the system role")
        for r in ("pointerX", "pointerP"):
            if names.count(r) > 1:
                raise ValueError(f"role {r} assigned twice")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def hbar(self) -> float:
        return self.factors[0].hbar

    def index_of(self, role: str) -> int:
        for k, r in self.roles.items():
            if r == role:
                return k
        raise KeyError(f"no factor with role {role!r}")

    def with_dims(self, dims: Sequence[int]) -> "CompositeSpace":
        """Same layout and roles with new truncation levels."""
        if len(dims) != len(self.factors):
            raise InvalidDimensionError(f"expected {len(self.factors)} dims, got {len(dims)}")
        return CompositeSpace(tuple(_mode(int(d), self.hbar) for d in dims), self.roles)

    def padded(self, extra: int) -> "CompositeSpace":
        return self.with_dims([d + extra for d in self.dims])

    def same_as(self, other: "CompositeSpace") -> bool:
        return (
            self is other
            or (
                len(self.factors) == len(other.factors)
                and all(a.same_as(b) for a, b in zip(self.factors, other.factors))
                and self.roles == other.roles
            )
        )

    def quadrature(self, index: int) -> "OperatorMatrix":
        """Embedded quadrature number ``index`` in the ordering (x1, p1, x2, p2, ...)."""
        mode = self.factors[index // 2]
        local = mode.x_op if index % 2 == 0 else mode.p_op
        return embed(local, index // 2, self)


def composite(dims: Sequence[int], hbar: float = 1.0, roles: Mapping[int, str] | None = None) -> CompositeSpace:
    """Convenience constructor; default roles are system, pointerX, pointerP, auxiliary..."""
    if roles is None:
        default = ("system", "pointerX", "pointerP")
        roles = {k: default[k] if k < 3 else "auxiliary" for k in range(len(dims))}
    return CompositeSpace(tuple(make_mode(d, hbar) for d in dims), roles)


class OperatorMatrix:
    """Operator on a composite space, dense or in Kronecker-sum form."""

    __slots__ = ("space", "_dense", "_kron")

    def __init__(self, space: CompositeSpace, entries: np.ndarray | None = None, kron: KronSum | None = None):
        if entries is None and kron is None:
            raise ValueError("either entries or kron must be given")
        n = space.total_dim
        if entries is not None:
            entries = np.asarray(entries, dtype=complex)
            if entries.shape != (n, n):
                raise InvalidDimensionError(f"operator shape {entries.shape} does not match space dimension {n}")
        if kron is not None and kron.dims != space.dims:
            raise InvalidDimensionError(f"factor layout {kron.dims} does not match space {space.dims}")
        self.space = space
        self._dense = entries
        self._kron = kron

    @property
    def entries(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self._kron.dense()
        return self._dense

    @property
    def kron(self) -> KronSum | None:
        return self._kron

    @property
    def is_structured(self) -> bool:
        return self._kron is not None

    @classmethod
    def identity(cls, space: CompositeSpace, coef: complex = 1.0) -> "OperatorMatrix":
        return cls(space, kron=KronSum.identity(space.dims, coef))

    # arithmetic ------------------------------------------------------------

    def _other(self, other: "OperatorMatrix") -> None:
        if not self.space.same_as(other.space):
            raise SpaceMismatchError(f"operators live on different spaces {self.space.dims} and {other.space.dims}")

    def __add__(self, other):
        if isinstance(other, OperatorMatrix):
            self._other(other)
            if self._kron is not None and other._kron is not None:
                return OperatorMatrix(self.space, kron=self._kron + other._kron)
            return OperatorMatrix(self.space, self.entries + other.entries)
        if np.isscalar(other):
            return self + OperatorMatrix.identity(self.space, other)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        if self._kron is not None:
            return OperatorMatrix(self.space, kron=self._kron * scalar)
        return OperatorMatrix(self.space, self._dense * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        self._other(other)
        if self._kron is not None and other._kron is not None:
            return OperatorMatrix(self.space, kron=self._kron @ other._kron)
        return OperatorMatrix(self.space, self.entries @ other.entries)

    def adjoint(self) -> "OperatorMatrix":
        if self._kron is not None:
            return OperatorMatrix(self.space, kron=self._kron.adjoint())
        return OperatorMatrix(self.space, self._dense.conj().T)

    def hermiticity_defect(self) -> float:
        m = self.entries
        return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if self._dense is None:
            return self._kron.apply(vec)
        return self._dense @ vec

    def compress(self, dims: Sequence[int]) -> "OperatorMatrix":
        """Restrict to the leading ``dims[k]`` levels of every factor (``P O P``)."""
        space = self.space.with_dims(dims)
        if self._kron is not None:
            return OperatorMatrix(space, kron=self._kron.compress(dims))
        idx = _leading_indices(self.space.dims, dims)
        return OperatorMatrix(space, self._dense[np.ix_(idx, idx)])

    def __repr__(self) -> str:
        form = "kron" if self._kron is not None else "dense"
        return f"OperatorMatrix(dims={self.space.dims}, {form})"


def _leading_indices(dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    if any(k > d or k < 1 for k, d in zip(keep, dims)):
        raise InvalidDimensionError(f"cannot keep {tuple(keep)} levels of {tuple(dims)}")
    grids = np.meshgrid(*[np.arange(k) for k in keep], indexing="ij")
    return np.ravel_multi_index([g.ravel() for g in grids], tuple(dims))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on a composite space."""

    space: CompositeSpace
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.space.total_dim:
            raise InvalidDimensionError(f"state length {amps.shape[0]} does not match dimension {self.space.total_dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidStateError(f"state is not normalized (norm {norm:.15g})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, space: CompositeSpace, amplitudes: np.ndarray) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise InvalidStateError("cannot normalize the zero vector")
        return cls(space, amps / norm)

    @classmethod
    def product(cls, space: CompositeSpace, locals_: Sequence[np.ndarray]) -> "StateVector":
        """Tensor product of normalized single-factor vectors in factor order."""
        if len(locals_) != len(space.factors):
            raise InvalidDimensionError("one local vector per factor is required")
        vec = np.ones(1, dtype=complex)
        for v, d in zip(locals_, space.dims):
            v = np.asarray(v, dtype=complex)
            if v.shape != (d,):
                raise InvalidDimensionError(f"local vector of length {v.shape} on a factor of dim {d}")
            vec = np.kron(vec, v)
        return cls.normalized(space, vec)


def single_mode_space(dim: int, hbar: float = 1.0) -> CompositeSpace:
    return CompositeSpace((make_mode(dim, hbar),), {0: "system"})


def embed(local_op: np.ndarray, factor_index: int, space: CompositeSpace) -> OperatorMatrix:
    """Place ``local_op`` on one factor, identities elsewhere."""
    if not 0 <= factor_index < len(space.factors):
        raise IndexError(f"factor index {factor_index} out of range for {len(space.factors)} factors")
    local_op = np.asarray(local_op, dtype=complex)
    d = space.dims[factor_index]
    if local_op.shape != (d, d):
        raise InvalidDimensionError(f"local operator shape {local_op.shape} does not match factor dim {d}")
    return OperatorMatrix(space, kron=KronSum.local(space.dims, factor_index, local_op))


def commutator(A: OperatorMatrix, B: OperatorMatrix) -> OperatorMatrix:
    """``AB - BA``."""
    A._other(B)
    return A @ B - B @ A


def evolve_unitary(H: OperatorMatrix, t: float) -> OperatorMatrix:
    """``exp(-i H t / hbar)`` from a Hermitian eigendecomposition.

    When ``H`` is in Kronecker form only the factors it acts on are
    diagonalized; the result is embedded with identities on the rest.
    """
    hbar = H.space.hbar
    active = _active_factors(H)
    if H.kron is not None and 0 < len(active) < len(H.space.factors):
        sub_dims = [H.space.dims[k] for k in active]
        sub = KronSum(sub_dims, [(c, tuple(locs[k] for k in active)) for c, locs in H.kron.terms])
        u_sub = _unitary_from_hermitian(sub.dense(), t, hbar)
        return _embed_block(u_sub, active, H.space)
    if H.kron is not None and not active:
        coef = sum(c for c, _ in H.kron.terms)
        if abs(np.imag(coef)) > HERMITIAN_TOL:
            raise HermiticityError(2 * abs(np.imag(coef)))
        return OperatorMatrix.identity(H.space, np.exp(-1j * np.real(coef) * t / hbar))
    return OperatorMatrix(H.space, _unitary_from_hermitian(H.entries, t, hbar))


def _active_factors(H: OperatorMatrix) -> list[int]:
    if H.kron is None:
        return list(range(len(H.space.factors)))
    return sorted({k for _, locs in H.kron.terms for k, a in enumerate(locs) if a is not None})


def _unitary_from_hermitian(h: np.ndarray, t: float, hbar: float) -> np.ndarray:
    defect = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if defect > HERMITIAN_TOL:
        raise HermiticityError(defect)
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t / hbar)) @ v.conj().T


def _embed_block(block: np.ndarray, active: list[int], space: CompositeSpace) -> OperatorMatrix:
    """Embed an operator on the ordered factors ``active`` into ``space``."""
    dims = space.dims
    n = len(dims)
    rest = [k for k in range(n) if k not in active]
    d_rest = int(np.prod([dims[k] for k in rest])) if rest else 1
    full = np.kron(block, np.eye(d_rest))
    # full acts on factors ordered active + rest; permute back to natural order
    order = active + rest
    shape = [dims[k] for k in order]
    perm = np.argsort(order)
    t = full.reshape(shape + shape)
    t = t.transpose(list(perm) + [n + p for p in perm])
    total = space.total_dim
    return OperatorMatrix(space, t.reshape(total, total))


def expectation(O: OperatorMatrix, s: StateVector) -> complex:
    """``<s|O|s>``."""
    if not O.space.same_as(s.space):
        raise SpaceMismatchError("operator and state live on different spaces")
    return complex(np.vdot(s.amplitudes, O.apply(s.amplitudes)))


def apply(O: OperatorMatrix, s: StateVector) -> StateVector:
    """``O|s>``, renormalized; intended for unitaries."""
    if not O.space.same_as(s.space):
        raise SpaceMismatchError("operator and state live on different spaces")
    return StateVector.normalized(s.space, O.apply(s.amplitudes))


def interior_dims(space: CompositeSpace, levels: int = 2) -> tuple[int, ...]:
    """Dimensions left after discarding the top ``levels`` Fock levels of each factor."""
    out = tuple(d - levels for d in space.dims)
    if min(out) < 1:
        raise InvalidDimensionError(f"dims {space.dims} too small to drop {levels} levels")
    return out


def interior_projection(O: OperatorMatrix, levels: int = 2) -> OperatorMatrix:
    """``Pi O Pi`` with ``Pi`` dropping the top ``levels`` Fock levels of each factor."""
    return O.compress(interior_dims(O.space, levels))


def operator_norm(O: OperatorMatrix | np.ndarray) -> float:
    """Spectral norm; above ``EXACT_NORM_MAX_DIM`` an upper bound is returned.

    The bound is ``min(Frobenius, sqrt(|O|_1 |O|_inf))``, which is never
    smaller than the spectral norm, so a small reported value is conclusive.
    """
    m = O.entries if isinstance(O, OperatorMatrix) else np.asarray(O)
    if m.size == 0:
        return 0.0
    if m.shape[0] <= EXACT_NORM_MAX_DIM:
        return float(np.linalg.norm(m, 2))
    fro = np.linalg.norm(m)
    holder = np.sqrt(np.abs(m).sum(axis=0).max() * np.abs(m).sum(axis=1).max())
    return float(min(fro, holder))


def residual_norms(O: OperatorMatrix, target: complex = 0.0, levels: int = 2) -> tuple[float, float]:
    """(raw, interior-projected) norms of ``O - target * I``."""
    R = O - target if target != 0 else O
    return operator_norm(R), operator_norm(interior_projection(R, levels))


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like random unit vector of length ``dim``."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)

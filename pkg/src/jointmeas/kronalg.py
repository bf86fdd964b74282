"""Sums of Kronecker products of single-factor matrices.

Every operator built from embedded quadratures is a short sum of terms of
the form ``c * (A_0 kron A_1 kron ... )`` where most ``A_k`` are identities.
Keeping that structure makes products, commutators and partial expectations
cost O(terms * d^3) instead of O(N^3) for the full composite dimension N.
A local entry of ``None`` stands for the identity on that factor.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

class KronSum:
    """Linear combination of Kronecker products on a fixed factor layout."""

    __slots__ = ("dims", "terms")

    def __init__(self, dims: Sequence[int], terms: Iterable[tuple[complex, tuple]] = ()):
        self.dims = tuple(int(d) for d in dims)
        self.terms = _merge(list(terms))

    @classmethod
    def identity(cls, dims: Sequence[int], coef: complex = 1.0) -> "KronSum":
        return cls(dims, [(complex(coef), (None,) * len(dims))])

    @classmethod
    def local(cls, dims: Sequence[int], index: int, mat: np.ndarray, coef: complex = 1.0) -> "KronSum":
        locs = [None] * len(dims)
        locs[index] = np.asarray(mat)
        return cls(dims, [(complex(coef), tuple(locs))])

    # arithmetic -----------------------------------------------------------

    def _check(self, other: "KronSum") -> None:
        if self.dims != other.dims:
            raise ValueError(f"factor layouts differ: {self.dims} vs {other.dims}")

    def __add__(self, other):
        if isinstance(other, KronSum):
            self._check(other)
            return KronSum(self.dims, self.terms + other.terms)
        if np.isscalar(other):
            return self + KronSum.identity(self.dims, other)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> "KronSum":
        return KronSum(self.dims, [(-c, locs) for c, locs in self.terms])

    def __sub__(self, other):
        if isinstance(other, KronSum) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return KronSum(self.dims, [(c * scalar, locs) for c, locs in self.terms])

    __rmul__ = __mul__

    def __matmul__(self, other: "KronSum") -> "KronSum":
        if not isinstance(other, KronSum):
            return NotImplemented
        self._check(other)
        out = []
        for c1, l1 in self.terms:
            for c2, l2 in other.terms:
                out.append((c1 * c2, tuple(_local_product(a, b) for a, b in zip(l1, l2))))
        return KronSum(self.dims, out)

    def adjoint(self) -> "KronSum":
        return KronSum(
            self.dims,
            [(np.conj(c), tuple(None if a is None else a.conj().T for a in locs)) for c, locs in self.terms],
        )

    def commutator(self, other: "KronSum") -> "KronSum":
        return self @ other - other @ self

    # structure-preserving maps --------------------------------------------

    def compress(self, dims: Sequence[int]) -> "KronSum":
        """Restrict every local matrix to its leading ``dims[k]`` block."""
        dims = tuple(int(d) for d in dims)
        if len(dims) != len(self.dims) or any(d > D for d, D in zip(dims, self.dims)):
            raise ValueError(f"cannot compress {self.dims} to {dims}")
        terms = [
            (c, tuple(None if a is None else a[:d, :d] for a, d in zip(locs, dims)))
            for c, locs in self.terms
        ]
        return KronSum(dims, terms)

    def contract(self, vectors: Mapping[int, np.ndarray]) -> "KronSum":
        """Take expectation values over the given factors.

        ``vectors`` maps factor index to a normalized vector on that factor;
        the result acts on the remaining factors in their original order.
        """
        keep = [k for k in range(len(self.dims)) if k not in vectors]
        cache: dict[tuple[int, int], complex] = {}
        out = []
        for c, locs in self.terms:
            coef = complex(c)
            for k, v in vectors.items():
                a = locs[k]
                if a is None:
                    continue
                key = (k, id(a))
                if key not in cache:
                    cache[key] = complex(np.vdot(v, a @ v))
                coef *= cache[key]
            out.append((coef, tuple(locs[k] for k in keep)))
        return KronSum([self.dims[k] for k in keep], out)

    # dense views -----------------------------------------------------------

    def dense(self) -> np.ndarray:
        total = int(np.prod(self.dims))
        out = np.zeros((total, total), dtype=complex)
        for c, locs in self.terms:
            mats = [np.eye(d) if a is None else a for a, d in zip(locs, self.dims)]
            out += c * reduce(np.kron, mats)
        return out

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Matrix-vector product without forming the dense matrix."""
        psi = np.asarray(vec, dtype=complex).reshape(self.dims)
        out = np.zeros_like(psi)
        for c, locs in self.terms:
            t = psi
            for k, a in enumerate(locs):
                if a is not None:
                    t = np.moveaxis(np.tensordot(a, t, axes=([1], [k])), 0, k)
            out += c * t
        return out.reshape(-1)

    def is_scalar(self) -> bool:
        return all(all(a is None for a in locs) for _, locs in self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"KronSum(dims={self.dims}, terms={len(self.terms)})"


def _local_product(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a @ b


def _merge(terms: list) -> list:
    """Combine terms sharing the very same local arrays and drop exact zeros."""
    merged: dict[tuple, list] = {}
    for c, locs in terms:
        key = tuple(None if a is None else id(a) for a in locs)
        if key in merged:
            merged[key][0] += c
        else:
            merged[key] = [complex(c), locs]
    return [(c, locs) for c, locs in merged.values() if c != 0]

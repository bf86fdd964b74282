import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointmeas.exceptions import (
    HermiticityError,
    InvalidDimensionError,
    InvalidStateError,
    SpaceMismatchError,
)
from jointmeas.kronalg import KronSum
from jointmeas.modespace import (
    OperatorMatrix,
    StateVector,
    commutator,
    composite,
    embed,
    evolve_unitary,
    expectation,
    interior_projection,
    ladder,
    make_mode,
    operator_norm,
    random_state,
    residual_norms,
    single_mode_space,
)

from oracles import kron_all, ladder_loop, quadratures, random_hermitian, unitary_expm


def test_dim2_position_matrix():
    m = make_mode(2)
    r = 1 / np.sqrt(2)
    assert np.allclose(m.x_op, [[0, r], [r, 0]], atol=1e-15)


def test_ladder_matches_loop_oracle():
    for d in (2, 5, 13):
        assert np.array_equal(ladder(d), ladder_loop(d))


def test_quadratures_match_oracle():
    x, p = quadratures(9, hbar=0.7)
    m = make_mode(9, hbar=0.7)
    assert np.allclose(m.x_op, x, atol=1e-15)
    assert np.allclose(m.p_op, p, atol=1e-15)


def test_dim8_commutator_diagonal():
    m = make_mode(8)
    c = m.x_op @ m.p_op - m.p_op @ m.x_op
    assert np.allclose(np.diag(c), 1j * np.array([1, 1, 1, 1, 1, 1, 1, -7]), atol=1e-13)
    assert np.allclose(c - np.diag(np.diag(c)), 0, atol=1e-13)


def test_hbar_scaling():
    assert np.allclose(make_mode(8, 2.0).x_op, np.sqrt(2) * make_mode(8, 1.0).x_op, atol=1e-15)


@pytest.mark.parametrize("dim", [0, 1, 2.5, -3])
def test_make_mode_rejects_bad_dims(dim):
    with pytest.raises(InvalidDimensionError):
        make_mode(dim)


def test_make_mode_rejects_bad_hbar():
    with pytest.raises(ValueError):
        make_mode(4, 0.0)


def test_composite_roles_and_dims():
    sp = composite((3, 4, 5))
    assert sp.dims == (3, 4, 5)
    assert sp.total_dim == 60
    assert sp.index_of("system") == 0
    assert sp.index_of("pointerX") == 1
    assert sp.index_of("pointerP") == 2


def test_embed_identity_gives_identity():
    sp = composite((3, 4, 2))
    for k, d in enumerate(sp.dims):
        assert np.allclose(embed(np.eye(d), k, sp).entries, np.eye(sp.total_dim))


def test_embed_matches_kron_oracle():
    sp = composite((4, 3), roles={0: "system", 1: "pointerX"})
    x, _ = quadratures(4)
    assert np.allclose(embed(x, 0, sp).entries, kron_all([x, np.eye(3)]))
    _, p = quadratures(3)
    assert np.allclose(embed(p, 1, sp).entries, kron_all([np.eye(4), p]))


def test_embeddings_on_distinct_factors_commute():
    sp = composite((4, 3, 3))
    rng = np.random.default_rng(1)
    A = embed(rng.normal(size=(4, 4)), 0, sp)
    B = embed(rng.normal(size=(3, 3)), 2, sp)
    assert np.abs(commutator(A, B).entries).max() == 0.0


def test_embed_checks_shape_and_index():
    sp = composite((3, 3, 3))
    with pytest.raises(InvalidDimensionError):
        embed(np.eye(4), 0, sp)
    with pytest.raises(IndexError):
        embed(np.eye(3), 3, sp)


def test_commutator_trivial_cases():
    sp = composite((3, 4, 3))
    rng = np.random.default_rng(2)
    A = OperatorMatrix(sp, rng.normal(size=(36, 36)))
    B = OperatorMatrix(sp, rng.normal(size=(36, 36)))
    assert np.abs(commutator(A, A).entries).max() == 0.0
    assert np.allclose(commutator(A, B).entries, -commutator(B, A).entries)


def test_commutator_space_mismatch():
    with pytest.raises(SpaceMismatchError):
        commutator(OperatorMatrix.identity(composite((3, 3, 3))), OperatorMatrix.identity(composite((3, 3, 4))))


def test_canonical_commutator_interior_exact():
    sp = composite((8, 5, 5))
    raw, interior = residual_norms(commutator(sp.quadrature(0), sp.quadrature(1)), 1j)
    assert raw == pytest.approx(8.0)
    assert interior < 1e-13


def test_evolve_unitary_zero_and_diagonal():
    sp = single_mode_space(5)
    assert np.allclose(evolve_unitary(OperatorMatrix(sp, np.zeros((5, 5))), 1.3).entries, np.eye(5))
    E = np.array([0.0, 1.0, -2.0, 0.5, 3.0])
    U = evolve_unitary(OperatorMatrix(sp, np.diag(E)), 0.7).entries
    assert np.allclose(U, np.diag(np.exp(-1j * E * 0.7)), atol=1e-14)


def test_evolve_unitary_random_hermitian():
    rng = np.random.default_rng(3)
    sp = composite((3, 2, 2))
    H = random_hermitian(12, rng)
    U = evolve_unitary(OperatorMatrix(sp, H), 0.37).entries
    assert np.abs(U.conj().T @ U - np.eye(12)).max() < 1e-10
    assert np.abs(U @ unitary_expm(H, -0.37) - np.eye(12)).max() < 1e-10


def test_evolve_unitary_structured_matches_dense():
    sp = composite((4, 3, 3), hbar=0.5)
    H = sp.quadrature(0) @ sp.quadrature(3) + sp.quadrature(1) @ sp.quadrature(5)
    U = evolve_unitary(H, 1.0).entries
    assert np.allclose(U, unitary_expm(H.entries, 1.0, 0.5), atol=1e-12)


def test_evolve_unitary_rejects_non_hermitian():
    sp = single_mode_space(3)
    with pytest.raises(HermiticityError):
        evolve_unitary(OperatorMatrix(sp, np.triu(np.ones((3, 3)))), 1.0)


def test_expectation_values():
    sp = single_mode_space(10)
    vac = StateVector.product(sp, [np.eye(10)[0]])
    x = sp.quadrature(0)
    assert expectation(OperatorMatrix.identity(sp), vac) == pytest.approx(1.0)
    assert abs(expectation(x, vac)) < 1e-15
    assert expectation(x @ x, vac) == pytest.approx(0.5, abs=1e-15)


def test_state_vector_validation():
    sp = single_mode_space(3)
    with pytest.raises(InvalidStateError):
        StateVector(sp, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(InvalidDimensionError):
        StateVector(sp, np.array([1.0, 0.0]))
    with pytest.raises(InvalidStateError):
        StateVector.normalized(sp, np.zeros(3))


def test_interior_projection_and_norm():
    sp = composite((6, 5, 4))
    O = OperatorMatrix(sp, np.diag(np.arange(120, dtype=float)))
    P = interior_projection(O)
    assert P.space.dims == (4, 3, 2)
    assert operator_norm(O) == pytest.approx(119.0)


def test_kronsum_dense_and_contract():
    rng = np.random.default_rng(4)
    A, B, C = rng.normal(size=(3, 3)), rng.normal(size=(2, 2)), rng.normal(size=(4, 4))
    K = KronSum((3, 2, 4), [(2.0, (A, None, C)), (1j, (None, B, None))])
    dense = 2.0 * kron_all([A, np.eye(2), C]) + 1j * kron_all([np.eye(3), B, np.eye(4)])
    assert np.allclose(K.dense(), dense)
    u, w = random_state(2, rng), random_state(4, rng)
    phi = np.kron(u, w)
    oracle = np.einsum("a,iajb,b->ij", phi.conj(), dense.reshape(3, 8, 3, 8), phi)
    assert np.allclose(K.contract({1: u, 2: w}).dense(), oracle)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(2, 4), st.integers(0, 2**31 - 1))
def test_structured_arithmetic_matches_dense(d0, d1, seed):
    rng = np.random.default_rng(seed)
    sp = composite((d0, d1, 2))
    ops = [sp.quadrature(i) for i in range(6)]
    i, j, k = rng.integers(0, 6, size=3)
    c = rng.normal()
    S = ops[i] @ ops[j] + c * ops[k] - 0.5
    D = ops[i].entries @ ops[j].entries + c * ops[k].entries - 0.5 * np.eye(sp.total_dim)
    assert S.is_structured
    assert np.allclose(S.entries, D)
    assert np.allclose(S.adjoint().entries, D.conj().T)
    keep = (d0 - 1 or 1, d1, 2)
    assert np.allclose(S.compress(keep).entries, OperatorMatrix(sp, D).compress(keep).entries)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 14), st.floats(0.2, 3.0))
def test_ccr_defect_confined_to_top_level(dim, hbar):
    m = make_mode(dim, hbar)
    c = m.x_op @ m.p_op - m.p_op @ m.x_op
    assert np.allclose(c[:-1, :-1], 1j * hbar * np.eye(dim - 1), atol=1e-12 * hbar * dim)
    assert c[-1, -1] == pytest.approx(-1j * hbar * (dim - 1))

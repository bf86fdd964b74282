import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointmeas.errlab import (
    SELECTORS,
    RangeBox,
    constrained_maximal_rms,
    error_forms,
    error_operators,
    error_report,
    grows_without_bound,
    heisenberg_final,
    hermite_functions,
    lift,
    maximal_rms,
    partial_expectation,
    pointer_joint_distribution,
    product_operator,
    resolve_backend,
    system_moment_operator,
)
from jointmeas.exceptions import GridError, InvalidStateError, SpaceMismatchError
from jointmeas.gaussian import QuadForm, second_moment
from jointmeas.models import MU_X, PI_P, X, ModeState, arthurs_kelly, biased_variant, identity_model, swap_rotation_model
from jointmeas.modespace import OperatorMatrix, composite

from oracles import ak_error_variances, ak_heisenberg, kron_all, quadratures


def test_resolve_backend():
    m = arthurs_kelly(dims=3)
    assert resolve_backend(m, None) == "gaussian"
    assert resolve_backend(m, "fock") == "fock"
    assert resolve_backend(m, "both") == "gaussian"
    with pytest.raises(ValueError):
        resolve_backend(m, "spectral")


def test_telescoping_identity():
    for m in (arthurs_kelly(pointer_squeeze=3.0, dims=3), swap_rotation_model(3), biased_variant(arthurs_kelly(dims=3), 2.0, 1.0)):
        f = error_forms(m)
        d = f.eps_Xi - f.eps_Xf - f.del_X
        assert np.abs(d.linear).max() < 1e-12 and abs(d.constant) < 1e-12


def test_heisenberg_final_identity_and_ak():
    m = identity_model(3)
    O = m.space.quadrature(MU_X)
    assert np.allclose(heisenberg_final(O, m).entries, O.entries)
    q = heisenberg_final(QuadForm.quadrature(6, MU_X), arthurs_kelly(dims=3))
    assert np.allclose(q.linear, ak_heisenberg()[MU_X])


def test_swap_heisenberg_final_x():
    q = heisenberg_final(QuadForm.quadrature(6, X), swap_rotation_model(3))
    assert np.allclose(q.linear, -np.eye(6)[MU_X], atol=1e-15)


def test_lift_matches_kron_oracle():
    sp = composite((3, 4, 2))
    q = QuadForm(np.array([1.0, 0, 0.5, 0, 0, -2.0]), 0.25)
    x0, _ = quadratures(3)
    x1, _ = quadratures(4)
    _, p2 = quadratures(2)
    dense = (
        kron_all([x0, np.eye(4), np.eye(2)])
        + 0.5 * kron_all([np.eye(3), x1, np.eye(2)])
        - 2.0 * kron_all([np.eye(3), np.eye(4), p2])
        + 0.25 * np.eye(24)
    )
    assert np.allclose(lift(q, sp).entries, dense)
    with pytest.raises(SpaceMismatchError):
        lift(QuadForm(np.zeros(4)), sp)


def test_error_operators_backends():
    m = swap_rotation_model(4)
    assert isinstance(error_operators(m, "gaussian").eps_Pi, QuadForm)
    ops = error_operators(m, "fock")
    assert isinstance(ops.eps_Pi, OperatorMatrix)
    assert np.abs(ops.eps_Xi.entries).max() == 0.0


def test_partial_expectation_trivial_cases():
    m = arthurs_kelly(dims=(4, 14, 6))
    sp = m.space
    assert np.allclose(partial_expectation(OperatorMatrix.identity(sp), m).entries, np.eye(4))
    mu = sp.quadrature(MU_X)
    A = partial_expectation(mu @ mu, m).entries
    # compressed second moment of the squeezed pointer, close to s hbar/4
    assert np.allclose(A, A[0, 0] * np.eye(4))
    assert A[0, 0] == pytest.approx(0.25, abs=1e-5)


def test_partial_expectation_dense_path_matches_structured():
    m = arthurs_kelly(dims=(3, 4, 4))
    O = product_operator(error_forms(m).eps_Xi, error_forms(m).eps_Pi, m.space)
    dense = OperatorMatrix(m.space, O.entries)
    a = partial_expectation(O, m, check_hermitian=False).entries
    b = partial_expectation(dense, m, check_hermitian=False).entries
    assert np.allclose(a, b)


def test_swap_eps_pi_squared_partial():
    d, c, v = 8, 0.7, 0.3
    m = swap_rotation_model((d, 6, 12), pointer_p_mean=c, pointer_p_var=v)
    q = error_forms(m).eps_Pi
    A = partial_expectation(product_operator(q, q, m.space), m).entries
    _, p = quadratures(d + 1)
    p2 = (p @ p)[:d, :d]
    pd = p[:d, :d]
    oracle = v * np.eye(d) + p2 - 2 * c * pd + c * c * np.eye(d)
    # pointer truncation at 12 levels for a displaced squeezed state
    assert np.abs(A - oracle).max() < 1e-6


def test_growth_rule():
    assert grows_without_bound([1.0, 2.0, 3.0])
    assert not grows_without_bound([1.0, 1.0, 1.0])
    assert not grows_without_bound([1.0, 1.5, 1.51])


def test_swap_maximal_rms():
    m = swap_rotation_model(8)
    assert maximal_rms("eps_Xi", m, "gaussian").value == 0.0
    assert maximal_rms("eps_Xi", m, "fock").value == 0.0
    assert maximal_rms("eps_Pi", m, "gaussian").infinite
    r = maximal_rms("eps_Pi", m, "fock", (8, 12, 16))
    assert r.infinite
    vals = [v for _, v in r.samples]
    assert vals == pytest.approx([3.2683998552527083, 4.16184695511841, 4.922398195588682], rel=1e-9)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_ak_maximal_rms_matches_hand_oracle(s):
    # squeezed pointers need about 32 levels for 1e-5 accuracy
    m = arthurs_kelly(pointer_squeeze=s, dims=(10, 32, 32))
    want = ak_error_variances(s)
    for k in SELECTORS:
        g = maximal_rms(k, m, "gaussian")
        assert g.value**2 == pytest.approx(want[k], rel=1e-12)
        f = maximal_rms(k, m, "fock", (10,))
        assert f.value**2 == pytest.approx(want[k], rel=1e-5)


def test_system_moment_operator_is_hermitian():
    A = system_moment_operator(error_forms(swap_rotation_model(5)).eps_Pi, swap_rotation_model(5), 7)
    assert A.shape == (7, 7) and np.allclose(A, A.conj().T)


def test_range_box_validation():
    with pytest.raises(ValueError):
        RangeBox(0, 0, 0.0, 1, 1, 1)
    with pytest.raises(ValueError):
        RangeBox(0, 0, 1, 1, 0.5, 0.5)
    big, small = RangeBox(0, 0, 4, 4, 1, 1), RangeBox(0.5, 0, 1, 1, 1, 1)
    assert big.contains(small) and not small.contains(big)


@pytest.mark.parametrize("P", [2.0, 4.0])
def test_swap_constrained_closed_form(P):
    m = swap_rotation_model(10)
    box = RangeBox(0.0, 0.0, 1.0, P, 1.0, 1.0)
    want = np.sqrt(0.5 + 1.0 + (P / 2) ** 2)
    g = constrained_maximal_rms("eps_Pi", m, box, "gaussian")
    assert g.certified == "exact" and g.value == pytest.approx(want, rel=1e-12)
    f = constrained_maximal_rms("eps_Pi", m, box, "fock", seed=1)
    assert f.certified == "lower_bound"
    assert f.violation <= 1e-8
    assert f.value <= want + 1e-9
    assert f.value >= P / 2


def test_degenerate_box_gives_center_rms():
    m = swap_rotation_model(10)
    box = RangeBox(0.3, -0.2, 1e-4, 1e-4, np.sqrt(0.5), np.sqrt(0.5))
    center = np.sqrt(second_moment(error_forms(m).eps_Pi, m.initial_gaussian(ModeState(0.3, -0.2))))
    assert constrained_maximal_rms("eps_Pi", m, box, "gaussian").value == pytest.approx(center, abs=1e-3)
    assert constrained_maximal_rms("eps_Pi", m, box, "fock").value == pytest.approx(center, abs=1e-3)


def test_ak_constrained_equals_unconstrained():
    m = arthurs_kelly(pointer_squeeze=2.0, dims=(10, 32, 32))
    box = RangeBox(0, 0, 2, 2, 1, 1)
    for backend in ("gaussian", "fock"):
        c = constrained_maximal_rms("eps_Xi", m, box, backend).value
        assert c == pytest.approx(1.0, rel=1e-5)


def test_constrained_is_deterministic():
    m = biased_variant(arthurs_kelly(dims=8), gain_x=2.0)
    box = RangeBox(0, 0, 2, 2, 1, 1)
    a = constrained_maximal_rms("eps_Xi", m, box, "fock", seed=5)
    b = constrained_maximal_rms("eps_Xi", m, box, "fock", seed=5)
    assert a.value == b.value and a.start_index == b.start_index


def test_error_report_fields():
    rep = error_report(swap_rotation_model(8), "gaussian", RangeBox(0, 0, 2, 2, 1, 1))
    assert rep.value("delta_ei_x") == 0.0
    # Var mu_P + tau^2 + (P/2)^2
    assert rep.primed("delta_ei_p") == pytest.approx(np.sqrt(2.5))
    assert rep.defects.Xi == 0.0


def test_hermite_functions_orthonormal():
    grid = np.linspace(-12, 12, 2001)
    H = hermite_functions(8, grid, hbar=0.8)
    G = H.T @ H * (grid[1] - grid[0])
    assert np.allclose(G, np.eye(8), atol=1e-10)


def test_pointer_distribution_ak_mean():
    m = arthurs_kelly(dims=(10, 12, 12))
    psi = ModeState(0.6, -0.4)
    grid = (np.linspace(-5, 5, 101), np.linspace(-5, 5, 101))
    g = pointer_joint_distribution(m, psi, grid, "gaussian")
    f = pointer_joint_distribution(m, psi, grid, "fock")
    assert g.mean == pytest.approx([0.6, -0.4], abs=1e-12)
    # 12 pointer levels leave about 1e-3 truncation error in the moments
    assert f.mean == pytest.approx([0.6, -0.4], abs=2e-3)
    assert f.mass == pytest.approx(1.0, abs=1e-5)
    assert np.allclose(f.cov, g.cov, atol=1e-2)
    assert np.allclose(g.cov, np.eye(2), atol=1e-12)


def test_swap_pointer_marginal_is_system_position():
    m = swap_rotation_model((16, 16, 8))
    psi = ModeState(0.8, 0.3, 0.4)
    xs = np.linspace(-3, 4.5, 121)
    grid = (xs, np.linspace(-4, 4, 81))
    d = pointer_joint_distribution(m, psi, grid, "fock")
    marginal = d.density.sum(axis=1) * (grid[1][1] - grid[1][0])
    pdf = np.exp(-((xs - 0.8) ** 2) / (2 * 0.4)) / np.sqrt(2 * np.pi * 0.4)
    assert np.abs(marginal - pdf).max() < 1e-4


def test_pointer_distribution_grid_errors():
    m = arthurs_kelly(dims=4)
    with pytest.raises(GridError):
        pointer_joint_distribution(m, ModeState(), (np.linspace(-0.5, 0.5, 11), np.linspace(-5, 5, 11)), "gaussian")
    with pytest.raises(GridError):
        pointer_joint_distribution(m, ModeState(), (np.array([0.0, 1.0]), np.linspace(-5, 5, 11)), "gaussian")
    with pytest.raises(InvalidStateError):
        pointer_joint_distribution(m, np.zeros(3), (np.linspace(-5, 5, 11),) * 2, "fock")


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.sampled_from(SELECTORS))
def test_per_state_moment_backends_agree(x0, p0, which):
    m = arthurs_kelly(pointer_squeeze=1.5, dims=(24, 32, 32))
    q = error_forms(m)[which]
    psi = ModeState(x0, p0)
    g = second_moment(q, m.initial_gaussian(psi))
    A = partial_expectation(product_operator(q, q, m.space), m).entries
    v = psi.fock(24)
    f = float(np.real(np.vdot(v, A @ v)))
    assert f == pytest.approx(g, rel=1e-5)


def test_pi_p_column_in_ak_error():
    q = error_forms(arthurs_kelly(dims=3)).eps_Xi
    assert q.linear[PI_P] == pytest.approx(0.5)

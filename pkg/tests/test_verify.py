import numpy as np
import pytest

from jointmeas.errlab import RangeBox
from jointmeas.exceptions import TruncationValidityError
from jointmeas.models import ModeState, arthurs_kelly, biased_variant, identity_model, swap_rotation_model
from jointmeas.modespace import make_mode, random_state
from jointmeas.verify import (
    HOLDS,
    INCONCLUSIVE,
    UNDEFINED,
    VIOLATED,
    PhaseSpaceBox,
    appendix_variance_identity_check,
    arthurs_kelly_pointer_check,
    box_average_divergence_check,
    check_commutator_identities,
    check_seven_inequalities,
    displacement_derivative_residuals,
    displacement_group_phase,
    displacement_operator,
    displacement_shift_residual,
    final_pointer_moments,
    product_margin,
    uniform_product_margins,
)


def test_zero_displacement_is_identity():
    assert np.allclose(displacement_operator(0.0, 0.0, make_mode(10)).entries, np.eye(10), atol=1e-14)


def test_displacement_shifts_quadratures():
    assert displacement_shift_residual(0.7, -0.5, make_mode(24)) < 1e-10


def test_displacement_warns_outside_valid_range():
    with pytest.warns(UserWarning):
        displacement_operator(4.0, 4.0, make_mode(8))


def test_derivative_identities_second_order():
    mode = make_mode(28)
    r1 = displacement_derivative_residuals(0.6, -0.3, mode, 1e-2)
    r2 = displacement_derivative_residuals(0.6, -0.3, mode, 5e-3)
    for k in r1:
        assert r1[k] < 1e-3
        assert r1[k] / r2[k] == pytest.approx(4.0, rel=0.05)


def test_group_law_phase():
    mode = make_mode(30)
    x1, p1, x2, p2 = 0.5, -0.3, -0.2, 0.7
    c, resid = displacement_group_phase(x1, p1, x2, p2, mode)
    assert abs(c) == pytest.approx(1.0, abs=1e-10)
    # Baker-Campbell-Hausdorff phase of two displacements
    assert c == pytest.approx(np.exp(0.5j * (p1 * x2 - x1 * p2)), abs=1e-10)
    assert resid < 1e-10


def test_identity_model_commutator():
    r = check_commutator_identities(identity_model(8))
    assert r["eq14"].interior < 1e-12
    assert r["eq14"].raw > 1.0


def test_swap_identities_small_dims():
    for name, r in check_commutator_identities(swap_rotation_model(8)).items():
        assert r.interior < 1e-8, name


def test_product_margin_cases():
    assert product_margin(0.0, np.inf, 0.5, 1.0)[1] == UNDEFINED
    assert product_margin(np.inf, 1.0, 0.5, 1.0) == (np.inf, HOLDS)
    assert product_margin(1.0, 0.5, 0.5, 1.0) == (0.0, HOLDS)
    assert product_margin(0.5, 0.5, 0.5, 1.0)[1] == VIOLATED


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_ak_sweep_margins(s):
    m = arthurs_kelly(pointer_squeeze=s, dims=(10, 14, 14))
    for backend in ("gaussian", "fock"):
        ms = check_seven_inequalities(m, None, backend)
        for name, v in ms.margins.items():
            assert v >= -1e-6, (backend, name, v)
        assert ms.all_hold()


def test_swap_eq21_undefined_and_eq6_premise():
    ms = check_seven_inequalities(swap_rotation_model(8), None, "gaussian")
    assert ms.flags["eq21"] == UNDEFINED
    assert np.isnan(ms.margins["eq21"])
    assert ms.flags["eq6"] == "premise_violated"


def test_swap_box_eq26():
    ms = check_seven_inequalities(swap_rotation_model(10), RangeBox(0, 0, 4, 4, 1, 1), "fock")
    assert ms.flags["eq26"] == HOLDS and ms.margins["eq26"] >= -1e-6
    assert "lower bounds" in ms.notes["finite_range"]


def test_fock_finite_range_flags_never_violated():
    # lower bounds can confirm a relation but never refute one
    m = identity_model(10)
    ms = check_seven_inequalities(m, RangeBox(0, 0, 0.5, 0.5, np.sqrt(0.5), np.sqrt(0.5)), "fock")
    for name in ("eq18_primed", "eq26", "eq27_ei_x_d_p", "eq27_ei_p_d_x", "eq28_ef_x_d_p", "eq28_ef_p_d_x"):
        assert ms.flags[name] in (HOLDS, INCONCLUSIVE)


def test_pointer_check_balanced_and_squeezed():
    psi = ModeState(0.3, 0.1)
    assert arthurs_kelly_pointer_check(arthurs_kelly(dims=4), psi, "gaussian") == pytest.approx(0.0, abs=1e-12)
    assert arthurs_kelly_pointer_check(arthurs_kelly(pointer_squeeze=4.0, dims=4), psi, "gaussian") > 0.1


def test_pointer_check_warns_on_biased():
    m = biased_variant(arthurs_kelly(dims=4), offset_x=1.0)
    with pytest.warns(UserWarning):
        v = arthurs_kelly_pointer_check(m, ModeState(), "gaussian")
    assert np.isfinite(v)


def test_final_pointer_moments_backends():
    m = arthurs_kelly(dims=(14, 14, 14))
    mg, cg = final_pointer_moments(m, ModeState(0.4, 0.2), "gaussian")
    mf, cf = final_pointer_moments(m, ModeState(0.4, 0.2), "fock")
    assert np.allclose(mg, mf, atol=1e-6) and np.allclose(cg, cf, atol=1e-5)


def test_variance_identity_examples():
    r = appendix_variance_identity_check(ModeState(0.0, 0.0), 3.0, 0.5)
    assert r.lhs == pytest.approx(10.0, abs=1e-12) and r.residual < 1e-12
    f = appendix_variance_identity_check(ModeState(0.0, 0.0), 3.0, 0.5, backend="fock", dims=(40, 4, 24))
    assert f.lhs == pytest.approx(10.0, abs=1e-6)
    tuned = appendix_variance_identity_check(ModeState(0.0, 1.5, 0.5), 1.5, 0.5)
    assert tuned.lhs == pytest.approx(1.0)


def test_stuck_needle_arbitrarily_small():
    values = [appendix_variance_identity_check(ModeState(0.0, 1.0, 1.0 / eps), 1.0, eps).lhs for eps in (1e-1, 1e-2, 1e-3)]
    assert values == pytest.approx([0.1 + 0.025, 0.01 + 0.0025, 0.001 + 0.00025])
    assert values[0] > values[1] > values[2]


def test_uniform_products_on_ak():
    m = arthurs_kelly(pointer_squeeze=2.0, dims=(12, 32, 32))
    rng = np.random.default_rng(7)
    states = np.array([random_state(12, rng) for _ in range(20)])
    for name, v in uniform_product_margins(m, states).items():
        assert v >= -1e-6 / 4, name


def test_divergence_unbiased_field_vanishes():
    rep = box_average_divergence_check(arthurs_kelly(dims=(12, 14, 14)), system_dim=26)
    assert rep.max_abs_v < 1e-8
    assert np.isnan(rep.order)
    assert np.allclose(rep.coarse.commutator, -1j, atol=1e-6)


def test_divergence_constant_offset_field():
    rep = box_average_divergence_check(biased_variant(arthurs_kelly(dims=(12, 14, 14)), offset_x=1.0))
    assert np.allclose(rep.coarse.v[..., 0], 1.0, atol=1e-6)
    assert np.abs(rep.coarse.divergence).max() < 1e-6
    assert np.allclose(rep.coarse.commutator, -1j, atol=1e-6)


def test_divergence_gain_biased_second_order():
    rep = box_average_divergence_check(biased_variant(arthurs_kelly(dims=(12, 14, 14)), gain_x=2.0))
    assert rep.order >= 1.8
    assert rep.valid and rep.chain_holds
    # eps_Xi = 2 mu_Xf - x has mean x, so div v = 1 and the commutator doubles
    assert np.allclose(rep.coarse.divergence, 1.0, atol=1e-6)
    assert rep.coarse.pointwise_residual < 1e-5


def test_divergence_rejects_out_of_range_box():
    with pytest.raises(TruncationValidityError):
        box_average_divergence_check(arthurs_kelly(dims=(8, 8, 8)), box=PhaseSpaceBox(8.0, 8.0), system_dim=12)

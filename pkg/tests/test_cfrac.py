import math

import numpy as np
import pytest

from bpve import cfrac
from bpve.env import fixture
from bpve.matprod import column_scan


# ---------------------------------------------------------------------
# coefficient streams
# ---------------------------------------------------------------------

def test_coefficient_values_on_constant_env(e_star):
    # atilde = 0.3, btilde = 0.3, dtilde = 1/3 at every level
    step = cfrac.coeffs_for(e_star, "step_ratio")
    assert step.at(1) == (pytest.approx(3.0), pytest.approx(10.0))
    assert (step.alpha_limit, step.beta_limit) == (pytest.approx(3.0),
                                                   pytest.approx(10.0))
    row = cfrac.coeffs_for(e_star, "row_ratio")
    assert row.at(4) == (pytest.approx(1.0), pytest.approx(10.0 / 9.0))
    col = cfrac.coeffs_for(e_star, "column_ratio")
    assert col.at(2) == (pytest.approx(0.9), pytest.approx(0.9))
    assert col.descending and not row.descending


def test_unknown_provenance_rejected(e_star):
    with pytest.raises(ValueError, match="provenance"):
        cfrac.coeffs_for(e_star, "diagonal_ratio")


def test_step_coefficients_negative_under_negative_dtilde(e_minus):
    step = cfrac.coeffs_for(e_minus, "step_ratio")
    alpha, beta = step.blocks(1, 5)
    assert np.all(alpha < 0.0) and np.all(beta < 0.0)
    assert step.at(1) == (pytest.approx(-7.0), pytest.approx(-10.0))


# ---------------------------------------------------------------------
# approximants and tails
# ---------------------------------------------------------------------

def test_tail_limits_of_constant_env(e_star, e_minus):
    assert cfrac.tail_limit(cfrac.coeffs_for(e_star, "step_ratio")) == \
        pytest.approx(2.0, rel=1e-14)
    assert cfrac.tail_limit(cfrac.coeffs_for(e_star, "row_ratio")) == \
        pytest.approx(2.0 / 3.0, rel=1e-14)
    assert cfrac.tail_limit(cfrac.coeffs_for(e_minus, "step_ratio")) == \
        pytest.approx(2.0, rel=1e-14)
    assert cfrac.tail_limit(cfrac.coeffs_for(e_minus, "row_ratio")) == \
        pytest.approx(-1.0, rel=1e-14)


def test_approximant_hand_values(e_star):
    step = cfrac.coeffs_for(e_star, "step_ratio")
    assert cfrac.approximant(step, 5, 5) == pytest.approx(10.0 / 3.0, rel=1e-15)
    assert cfrac.approximant(step, 5, 6) == pytest.approx(
        10.0 / (3.0 + 10.0 / 3.0), rel=1e-15)
    with pytest.raises(ValueError):
        cfrac.approximant(step, 5, 4)


def test_approximant_sweep_matches_backward(any_env):
    step = cfrac.coeffs_for(any_env, "step_ratio")
    sweep = cfrac.approximant_sweep(step, 3, 40)
    for m in (3, 10, 25, 40):
        assert sweep[m - 3] == pytest.approx(
            cfrac.approximant(step, 3, m), abs=1e-12)


def test_singular_denominator_raises():
    coeffs = cfrac.custom_coeffs(lambda k: 1.0, lambda k: -1.0,
                                 alpha_limit=1.0, beta_limit=-1.0)
    # xi_{k,k} = -1, then alpha + xi = 0 at the next level down
    with pytest.raises(cfrac.SingularApproximantError):
        cfrac.approximant(coeffs, 1, 5)


def test_tails_block_hits_fixed_points(e_star, e_minus):
    xi = cfrac.tails_block(cfrac.coeffs_for(e_star, "step_ratio"), 50, env=e_star)
    assert np.allclose(xi, 2.0, atol=1e-13)
    xi = cfrac.tails_block(cfrac.coeffs_for(e_minus, "row_ratio"), 50, env=e_minus)
    assert np.allclose(xi, -1.0, atol=1e-13)


def test_streamed_tail_agrees_with_block(any_env):
    coeffs = cfrac.coeffs_for(any_env, "step_ratio")
    block = cfrac.tails_block(coeffs, 8, env=any_env)
    for k in (1, 4, 8):
        assert cfrac.tail(coeffs, k) == pytest.approx(block[k - 1], abs=1e-11)


def test_critical_tail_shares_the_limit(e_star):
    step = cfrac.coeffs_for(e_star, "step_ratio")
    assert cfrac.critical_tail(step, 60) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        cfrac.critical_tail(step, 1)


def test_h_ratio_and_column_value_limits(e_star):
    row = cfrac.coeffs_for(e_star, "row_ratio")
    assert cfrac.h_ratio(row, 80, 1) == pytest.approx(0.6, abs=1e-12)
    col = cfrac.coeffs_for(e_star, "column_ratio")
    assert cfrac.column_value(col, 80) == pytest.approx(0.6, abs=1e-12)


# ---------------------------------------------------------------------
# three-term form
# ---------------------------------------------------------------------

def test_euler_minding_increments_telescope(e_tri_down):
    step = cfrac.coeffs_for(e_tri_down, "step_ratio")
    em = cfrac.euler_minding(step, 2, 60)
    rebuilt = em.xi[0] + np.cumsum(em.increments())
    assert np.max(np.abs(rebuilt - em.xi[1:])) < 1e-13


def test_euler_minding_increment_signs_alternate_only_when_expected(e_star):
    # positive coefficient streams give strictly alternating increments
    step = cfrac.coeffs_for(e_star, "step_ratio")
    em = cfrac.euler_minding(step, 1, 30)
    signs = em.inc_sign
    assert np.all(signs[::2] == signs[0])
    assert np.all(signs[1::2] == -signs[0])


def test_matrix_bridge_pairings(any_env):
    for prov in ("step_ratio", "row_ratio", "column_ratio"):
        coeffs = cfrac.coeffs_for(any_env, prov)
        for k, n in ((1, 30), (4, 45)):
            via = cfrac.matrix_bridge(any_env, prov, k, n)
            if prov == "column_ratio":
                direct = cfrac.column_value(coeffs, k)
            else:
                direct = cfrac.approximant(coeffs, k, n)
            assert direct == pytest.approx(via, abs=5e-13)


def test_step_bridge_is_column_component_ratio(e_tri_up):
    # the step family expands the ratio of successive first components
    # of suffix columns; spot-check the identity at one site
    cols, logs = column_scan(e_tri_up, 1, 25, (1.0, 0.0), which="A")
    want = cols[3][0] / cols[2][0] * math.exp(logs[3] - logs[2])
    step = cfrac.coeffs_for(e_tri_up, "step_ratio")
    assert cfrac.approximant(step, 3, 25) == pytest.approx(want, abs=1e-13)


def test_entry_ratio_recursion_limits(e_star):
    f2 = cfrac.entry_ratio_recursion(e_star, 80, row=2)
    f1 = cfrac.entry_ratio_recursion(e_star, 80, row=1)
    assert f2[0] == 0.0
    assert f1[0] == pytest.approx(1.0)   # btilde_1/atilde_1
    assert f2[-1] == pytest.approx(0.6, abs=1e-12)
    assert f1[-1] == pytest.approx(0.6, abs=1e-12)


# ---------------------------------------------------------------------
# fluctuations
# ---------------------------------------------------------------------

def test_fluctuations_on_constant_env(e_star):
    fl = cfrac.fluctuations(e_star, K=128)
    # frozen-coefficient deviations vanish identically for delta terms
    assert np.max(np.abs(fl.delta_f)) == 0.0
    assert np.max(np.abs(fl.delta_xi)) == 0.0
    assert fl.q_hat_delta_f is None and fl.q_hat_delta_xi is None
    assert any("identically zero" in n for n in fl.notes)
    # the entry-ratio deviation decays like rho1/rho = -0.4; the ratio
    # sequence is truncated where the deviations hit float noise, so
    # the estimate carries a few 1e-6 of that noise
    assert fl.q_hat_eps_f == pytest.approx(-0.4, abs=1e-4)
    assert fl.eps_f_alt_ratio == pytest.approx(-0.4, rel=1e-13)


def test_fluctuations_on_perturbed_env(e_tri_up):
    fl = cfrac.fluctuations(e_tri_up, K=128)
    assert np.max(np.abs(fl.delta_f)) > 0.0
    # the perturbation decays at rate 1/2, and |rho1/rho| = 0.4 on the
    # base; the delta sequences inherit the slower geometric rate
    assert fl.q_hat_delta_f == pytest.approx(0.5, abs=1e-3)
    assert fl.q_hat_delta_xi == pytest.approx(0.5, abs=1e-3)

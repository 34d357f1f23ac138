import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpve.env import EnvFamily, fixture
from bpve.matprod import (
    LogScalar,
    ScalingError,
    column_scan,
    conjugation_residual,
    entry_and_sign_report,
    logscalar_sum,
    mean_matrix,
    product_scan,
    product_spectral_radius,
    radius_block,
    row_scan,
    row_sum_scan,
    scaled_product,
    spectral_radius,
    transformed_matrix,
)

reals = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
nonzero = reals.filter(lambda x: abs(x) > 1e-6)


# ---------------------------------------------------------------------
# signed log-domain scalars
# ---------------------------------------------------------------------

# stored logs carry an absolute eps |log| error, so round trips are
# accurate to about 700 eps relative near the edges of float range
LOG_RT = 2e-13


@settings(max_examples=80, deadline=None)
@given(reals, reals)
def test_logscalar_field_ops_match_floats(x, y):
    lx, ly = LogScalar.of(x), LogScalar.of(y)
    assert (lx * ly).to_float() == pytest.approx(x * y, rel=LOG_RT, abs=1e-300)
    assert (lx + ly).to_float() == pytest.approx(x + y, rel=1e-12, abs=1e-9)
    assert (lx - ly).to_float() == pytest.approx(x - y, rel=1e-12, abs=1e-9)
    assert (-lx).to_float() == pytest.approx(-x, rel=LOG_RT, abs=0.0)


@settings(max_examples=50, deadline=None)
@given(reals, nonzero)
def test_logscalar_division(x, y):
    got = (LogScalar.of(x) / LogScalar.of(y)).to_float()
    assert got == pytest.approx(x / y, rel=LOG_RT, abs=1e-300)


def test_logscalar_zero_and_scale_handling():
    assert LogScalar.of(0.0).to_float() == 0.0
    assert (LogScalar.of(3.0) * LogScalar.ZERO).sign == 0
    with pytest.raises(ZeroDivisionError):
        LogScalar.ONE / LogScalar.ZERO
    # a scale far outside float range stays exact in the log domain
    big = LogScalar.of(2.0).scaled(800.0)
    small = LogScalar.of(5.0).scaled(-800.0)
    assert (big * small).to_float() == pytest.approx(10.0, rel=1e-13)
    assert (big - big).sign == 0


def test_logscalar_near_cancellation_keeps_the_difference():
    # logs distinct as doubles but so close that exp(diff) rounds to
    # exactly 1.0; the subtraction must yield the tiny gap, not raise
    x = LogScalar(1, 0.0)
    y = LogScalar(-1, -5e-17)
    got = x + y
    assert got.sign == 1
    assert got.to_float() == pytest.approx(5e-17, rel=1e-12)


def test_logscalar_sum_matches_fsum():
    values = [3.0, -2.9999999, 1e-9, 12.5, -12.5]
    got = logscalar_sum(LogScalar.of(v) for v in values).to_float()
    assert got == pytest.approx(math.fsum(values), rel=1e-9)


# ---------------------------------------------------------------------
# single matrices and the conjugation
# ---------------------------------------------------------------------

def test_mean_and_transformed_matrices(e_star):
    assert np.array_equal(mean_matrix(e_star, 1),
                          np.array([[0.2, 0.3], [0.4, 0.1]]))
    expect = np.array([[0.3, 0.3], [0.4 - 0.02 / 0.3, 0.0]])
    assert np.allclose(transformed_matrix(e_star, 1), expect, atol=1e-15)


def test_conjugation_residual_rounding_level(any_env):
    for k in (1, 2, 7, 30):
        assert conjugation_residual(any_env, k) < 1e-14


def test_spectral_radius_real_and_complex():
    sp = spectral_radius(np.array([[0.2, 0.3], [0.4, 0.1]]))
    assert sp.rho == pytest.approx(0.5, abs=1e-15)
    assert not sp.complex_pair
    sp = spectral_radius(np.array([[0.1, -0.5], [0.5, 0.1]]))
    assert sp.complex_pair
    assert sp.rho == pytest.approx(math.sqrt(0.01 + 0.25), rel=1e-14)


def test_radius_block_matches_scalar_calls(e_tri_up):
    rho, cplx = radius_block(e_tri_up, 1, 20, which="M")
    assert not np.any(cplx)
    for j, k in enumerate(range(1, 21)):
        assert rho[j] == pytest.approx(
            spectral_radius(mean_matrix(e_tri_up, k)).rho, rel=1e-14)


# ---------------------------------------------------------------------
# scaled products and scans
# ---------------------------------------------------------------------

def _naive_product(env, k, n, which="M"):
    out = np.eye(2)
    for j in range(k, n + 1):
        mat = mean_matrix(env, j) if which == "M" else transformed_matrix(env, j)
        out = out @ mat
    return out


def test_scaled_product_matches_naive(nondeg_env):
    for k, n in ((1, 1), (1, 12), (3, 17)):
        p = scaled_product(nondeg_env, k, n)
        assert np.allclose(p.to_dense(), _naive_product(nondeg_env, k, n),
                           rtol=1e-13, atol=1e-300)


def test_scaled_product_survives_extreme_depth(e_star, e_deg):
    # subcritical underflow and supercritical overflow both stay finite
    # in scaled form
    for env, sign in ((e_star, -1.0), (e_deg, 1.0)):
        p = scaled_product(env, 1, 3000)
        assert np.all(np.isfinite(p.mat))
        assert math.copysign(1.0, p.log) == sign
        assert np.max(np.abs(p.mat)) == pytest.approx(1.0)


def test_product_scan_prefixes(e_minus):
    scans = product_scan(e_minus, 1, 9)
    assert len(scans) == 9
    for idx, p in enumerate(scans, start=1):
        assert np.allclose(p.to_dense(), _naive_product(e_minus, 1, idx),
                           rtol=1e-12)


def test_scaled_entry_accessor(e_star):
    p = scaled_product(e_star, 1, 40)
    dense = p.to_dense()
    for i in (1, 2):
        for j in (1, 2):
            assert p.entry(i, j).to_float() == pytest.approx(
                dense[i - 1, j - 1], rel=1e-13)


def test_product_radius_of_constant_env_is_power(e_star):
    for n in (1, 5, 40):
        log_rho, cplx = product_spectral_radius(scaled_product(e_star, 1, n))
        assert not cplx
        assert log_rho == pytest.approx(n * math.log(0.5), rel=1e-12)


def test_row_scan_tracks_left_products(e_tri_down):
    rows, logs = row_scan(e_tri_down, 10, (1.0, 0.0))
    for m in range(11):
        true = np.array([1.0, 0.0]) @ _naive_product(e_tri_down, 1, m)
        assert np.allclose(rows[m] * math.exp(logs[m]), true, rtol=1e-12)


def test_row_scan_rejects_zero_start(e_star):
    with pytest.raises(ScalingError):
        row_scan(e_star, 3, (0.0, 0.0))


def test_row_sum_scan_accumulates_injections(e_minus):
    rows, logs = row_sum_scan(e_minus, 8, inject=(1.0, 0.0))
    for m in range(9):
        true = np.zeros(2)
        for k in range(1, m + 2):   # k = m+1 contributes the empty product
            true += np.array([1.0, 0.0]) @ _naive_product(e_minus, k, m)
        assert np.allclose(rows[m] * math.exp(logs[m]), true, rtol=1e-12)


def test_column_scan_tracks_right_products(e_tri_up):
    cols, logs = column_scan(e_tri_up, 2, 9, (1.0, 0.0), which="A")
    for j in range(2, 11):
        true = _naive_product(e_tri_up, j, 9, which="A") @ np.array([1.0, 0.0])
        assert np.allclose(cols[j - 2] * math.exp(logs[j - 2]), true, rtol=1e-12)


def test_sign_report_negative_bottom_row(e_minus, e_star):
    rep = entry_and_sign_report(e_minus, 1, 30)
    assert rep.top_row_positive
    assert rep.bottom_row_sign == -1 == rep.expected_bottom_sign
    assert rep.matches
    rep = entry_and_sign_report(e_star, 1, 30)
    assert rep.bottom_row_sign == 1
    assert rep.matches

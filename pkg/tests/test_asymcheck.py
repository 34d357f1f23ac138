import pytest

from bpve import asymcheck
from bpve.asymcheck import PreconditionError
from bpve.env import EnvFamily


# ---------------------------------------------------------------------
# scaled product entries
# ---------------------------------------------------------------------

def test_entry_to_radius_limit_star_value(e_star):
    d = asymcheck.entry_to_radius_limit(e_star, 1, 1, 1, nmax=300)
    assert d.stabilized
    assert d.limit_estimate == pytest.approx(5.0 / 7.0, rel=1e-10)
    assert not d.violated


def test_entry_to_radius_keeps_corner_sign(e_minus):
    # the bottom rows of the transformed products go negative on this
    # family; the scaled entry limit must carry that sign through
    d = asymcheck.entry_to_radius_limit(e_minus, 1, 2, 1, nmax=200)
    assert d.stabilized
    assert d.limit_estimate < 0.0
    assert not d.violated


def test_entry_to_radius_rejects_bad_indices(e_star):
    with pytest.raises(ValueError):
        asymcheck.entry_to_radius_limit(e_star, 1, 0, 1)
    with pytest.raises(ValueError):
        asymcheck.entry_to_radius_limit(e_star, 0, 1, 1)


def test_bounded_ratio_report_constant_family(e_star):
    x, c, b = asymcheck.bounded_ratio_report(e_star, 1, nmax=300)
    assert not x.violated
    assert x.bound_check.lower > 0.0
    # constant environment: the per-step radii of the transformed and
    # raw families coincide, so both comparison constants are one
    assert c.limit_estimate == pytest.approx(1.0, abs=1e-12)
    assert b.limit_estimate == pytest.approx(1.0, abs=1e-12)


def test_bounded_ratio_report_perturbed(e_tri_up):
    x, c, b = asymcheck.bounded_ratio_report(e_tri_up, 1, nmax=300)
    assert not x.violated
    assert c.stabilized and b.stabilized
    assert c.limit_estimate > 0.0
    assert b.limit_estimate > 0.0


# ---------------------------------------------------------------------
# partial sums and approximant products
# ---------------------------------------------------------------------

def test_partial_sum_ratio_star(e_star):
    d = asymcheck.partial_sum_ratio(e_star, nmax=400)
    assert d.stabilized
    assert d.limit_estimate == pytest.approx(5.0 / 6.0, rel=1e-9)
    assert not d.violated


def test_partial_sum_ratio_needs_nondegenerate_determinant():
    env = EnvFamily.constant(0.2, 0.3, 0.2, 0.3)
    with pytest.raises(PreconditionError):
        asymcheck.partial_sum_ratio(env, 50)


def test_approximant_product_ratios_star(e_star):
    r1, r2, r3 = asymcheck.approximant_product_ratios(e_star, nmax=400)
    # the per-step radius is exactly half and the step tail exactly two,
    # so the first two ratios agree term by term
    assert r1.limit_estimate == pytest.approx(1.4, rel=1e-9)
    assert r2.limit_estimate == pytest.approx(1.4, rel=1e-9)
    assert r3.limit_estimate == pytest.approx(7.0 / 6.0, rel=1e-9)
    assert not any(d.violated for d in (r1, r2, r3))


# ---------------------------------------------------------------------
# spectral radius of products against products of radii
# ---------------------------------------------------------------------

def test_radius_product_bounds_hold(any_env):
    d = asymcheck.radius_product_bounds(any_env, 1, 200)
    assert not d.violated
    assert d.notes == "violations=0"
    # constant families collapse the bracket to a point, so the final
    # ratio sits on it only up to the same rounding slack the count uses
    assert d.bound_check.lower * (1 - 1e-12) <= d.values[-1]
    assert d.values[-1] <= d.bound_check.upper * (1 + 1e-12)


def test_radius_product_bounds_rejects_bad_range(e_star):
    with pytest.raises(ValueError):
        asymcheck.radius_product_bounds(e_star, 5, 4)


def test_radius_ratio_limits_star(e_star):
    d1, d2 = asymcheck.radius_ratio_limits(e_star, 1, nmax=300)
    t1, t2 = asymcheck.radius_ratio_targets(e_star, 1)
    assert t1 == pytest.approx(1.4, rel=1e-12)
    assert t2 == pytest.approx(1.0, rel=1e-12)
    assert d1.limit_estimate == pytest.approx(t1, abs=1e-8)
    assert d2.limit_estimate == pytest.approx(t2, abs=1e-8)


# ---------------------------------------------------------------------
# monotone approximants in the signed regime
# ---------------------------------------------------------------------

def test_monotonicity_negative_regime(e_minus):
    rep = asymcheck.approximant_monotonicity_report(e_minus, kmax=60, nmax=80)
    assert rep.increment_violations == 0
    assert rep.tail_bound_violations == 0
    assert not rep.violated
    assert rep.ratio_limit == pytest.approx(0.4, rel=1e-12)
    assert rep.ratio_sup <= rep.ratio_limit + 1e-6


def test_monotonicity_holds_on_geometric_negative(e_tri_down):
    rep = asymcheck.approximant_monotonicity_report(e_tri_down,
                                                    kmax=50, nmax=60)
    assert rep.increment_violations == 0
    assert rep.tail_bound_violations == 0
    assert rep.ratio_sup <= rep.ratio_limit + 1e-6


def test_monotonicity_rejects_positive_profile(e_star):
    with pytest.raises(PreconditionError):
        asymcheck.approximant_monotonicity_report(e_star, 10, 10)


def test_default_burn_in_on_fixtures(any_env):
    assert asymcheck.default_burn_in(any_env) == 1


# ---------------------------------------------------------------------
# the suite
# ---------------------------------------------------------------------

def test_run_suite_clean_on_fixtures(any_env):
    rep = asymcheck.run_suite(any_env, nmax=400, threads=2)
    assert rep.verification_failures == 0
    assert rep.cross_link_residual <= 1e-8
    assert rep.target_residuals[0] <= 1e-8
    names = [d.name for d in rep.all_diagnostics()]
    assert len(names) == len(set(names))
    s = rep.summary()
    assert s["environment"] == any_env.name
    assert s["verification_failures"] == 0
    assert len(s["diagnostics"]) == len(names)


def test_run_suite_thread_count_does_not_change_results(e_star):
    one = asymcheck.run_suite(e_star, nmax=200, threads=1)
    four = asymcheck.run_suite(e_star, nmax=200, threads=4)
    assert one.cross_link_residual == four.cross_link_residual
    est_one = [d.limit_estimate for d in one.all_diagnostics()]
    est_four = [d.limit_estimate for d in four.all_diagnostics()]
    assert est_one == est_four

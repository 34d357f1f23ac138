import numpy as np
import pytest

from bpve import mcsim
from bpve.env import EnvFamily
from bpve.mcsim import ExplosionGuardError, InvalidLawError


# ---------------------------------------------------------------------
# offspring laws
# ---------------------------------------------------------------------

def test_offspring_law_star_type1(e_star):
    law = mcsim.offspring_law(e_star, 1, 1)
    assert law.q0 == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert law.p == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert law.lam1 == pytest.approx(0.2, rel=1e-13)
    assert law.lam2 == pytest.approx(0.3, rel=1e-13)
    assert law.lam1 + law.lam2 == pytest.approx(law.mean1 + law.mean2, rel=1e-13)


def test_offspring_law_star_type2(e_star):
    law = mcsim.offspring_law(e_star, 1, 2)
    assert law.q0 == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert law.lam1 == pytest.approx(0.5, rel=1e-13)
    assert law.lam2 == pytest.approx(0.0, abs=1e-15)
    assert (law.mean1, law.mean2) == (0.4, 0.1)


def test_offspring_law_rejects_bad_type(e_star):
    with pytest.raises(InvalidLawError):
        mcsim.offspring_law(e_star, 1, 0)


def test_offspring_law_refuses_negative_tilt(e_tri_down):
    with pytest.raises(InvalidLawError, match="type 2"):
        mcsim.offspring_law(e_tri_down, 1, 2)


def test_offspring_law_refuses_negative_mass(e_deg):
    # the degenerate family's type-2 parameters are a formal object:
    # the zero-offspring mass is negative, so nothing can sample it
    with pytest.raises(InvalidLawError, match="zero-offspring"):
        mcsim.offspring_law(e_deg, 1, 2)


# ---------------------------------------------------------------------
# pgf validation
# ---------------------------------------------------------------------

@pytest.mark.parametrize("name", ["e_star", "e_minus", "e_tri_up", "e_deg"])
def test_validate_pgf_accepts(name, request):
    env = request.getfixturevalue(name)
    rep = mcsim.validate_pgf(env, 1, n_check=50)
    assert rep.passed
    assert rep.n_check == 50
    assert all(t.identity_rel_err <= 1e-10 for t in rep.per_type)


def test_validate_pgf_reports_formal_mass_without_gating(e_deg):
    rep = mcsim.validate_pgf(e_deg, 1, n_check=50)
    assert rep.passed
    assert rep.per_type[1].q0 < 0.0
    assert rep.per_type[1].min_weight >= -mcsim.NEG_TOL


def test_validate_pgf_rejects_signed_weights(e_tri_down):
    with pytest.raises(InvalidLawError, match="type 2 at generation 1"):
        mcsim.validate_pgf(e_tri_down, 1, n_check=50)
    with pytest.raises(InvalidLawError):
        mcsim.validate_pgf(e_tri_down, 2, n_check=50)


def test_validate_pgf_rejects_crafted_parameters():
    env = EnvFamily.constant(0.2, 0.01, 0.01, 5.0)
    with pytest.raises(InvalidLawError, match="type 2"):
        mcsim.validate_pgf(env, 1, n_check=20)


def test_validate_pgf_rejects_bad_horizon(e_star):
    with pytest.raises(ValueError):
        mcsim.validate_pgf(e_star, 1, n_check=0)


# ---------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------

def test_batch_sampler_matches_law_moments(e_star):
    rng = np.random.default_rng(7)
    law = mcsim.offspring_law(e_star, 1, 1)
    j1, j2 = mcsim.sample_offspring_batch(law, 200_000, rng)
    # per-draw child means equal the mean matrix row; the variances are
    # order one, so four sigma at 2e5 draws is well under 0.01
    assert abs(j1.mean() - 0.2) < 0.01
    assert abs(j2.mean() - 0.3) < 0.01
    total = j1 + j2
    p0 = np.mean(total == 0)
    assert abs(p0 - law.q0) < 0.005
    # conditional totals are geometric: P(N = n | N > 0) has mean 1/(1-p)
    alive = total[total > 0]
    assert abs(alive.mean() - 1.0 / (1.0 - law.p)) < 0.02


def test_single_draw_explosion_guard():
    # a law whose typical litter is near the cap trips the guard fast
    env = EnvFamily.constant(5e5, 5e5, 5e5, 5e5)
    law = mcsim.offspring_law(env, 1, 1)
    rng = np.random.default_rng(3)
    with pytest.raises(ExplosionGuardError):
        for _ in range(200):
            mcsim.sample_offspring(law, rng)


# ---------------------------------------------------------------------
# forward simulation
# ---------------------------------------------------------------------

def test_run_matches_closed_form_survival(e_star):
    res = mcsim.run(e_star, 1, (1, 2, 5), replicates=200_000,
                    master_seed=42, threads=1)
    truth = np.array([1.0 / 3.0, 1.0 / 7.0, 1.0 / 63.0])
    z = np.abs(res.survival_hat - truth) / np.sqrt(truth * (1 - truth)
                                                   / res.replicates)
    assert np.all(z < 4.0)
    assert res.exploded == 0
    assert abs(res.offspring_mean[0] - 0.2) < 4 * res.offspring_stderr[0] + 1e-9
    assert abs(res.offspring_mean[1] - 0.3) < 4 * res.offspring_stderr[1] + 1e-9


def test_run_type2_start(e_star):
    res = mcsim.run(e_star, 2, (1, 3), replicates=150_000,
                    master_seed=11, threads=1)
    truth = np.array([1.0 / 3.0, 1.0 / 15.0])
    z = np.abs(res.survival_hat - truth) / np.sqrt(truth * (1 - truth)
                                                   / res.replicates)
    assert np.all(z < 4.0)
    # a type-2 parent's first generation draws from the second mean row
    assert abs(res.offspring_mean[0] - 0.4) < 4 * res.offspring_stderr[0] + 1e-9
    assert abs(res.offspring_mean[1] - 0.1) < 4 * res.offspring_stderr[1] + 1e-9


def test_run_is_thread_and_schedule_invariant(e_star):
    kw = dict(horizons=(1, 2, 5, 10), replicates=300_000, master_seed=9)
    one = mcsim.run(e_star, 1, threads=1, **kw)
    four = mcsim.run(e_star, 1, threads=4, **kw)
    assert np.array_equal(one.survivors, four.survivors)
    assert one.offspring_mean == four.offspring_mean
    assert one.offspring_stderr == four.offspring_stderr
    assert one.exploded == four.exploded


def test_run_freezes_exploding_replicates(monkeypatch):
    # supercritical family with genuine laws; a small cap makes the
    # freeze path cheap to reach
    env = EnvFamily.constant(0.8, 0.7, 0.7, 0.8)
    monkeypatch.setattr(mcsim, "EXPLOSION_LIMIT", 5_000)
    res = mcsim.run(env, 1, (5, 25, 30), replicates=64,
                    master_seed=5, threads=1)
    assert res.exploded > 0
    # frozen replicates stay survivors at every later horizon
    assert res.survivors[2] >= res.exploded
    assert res.survivors[0] >= res.survivors[1] >= res.survivors[2]


def test_run_fails_fast_on_unsampleable_generations(e_deg):
    with pytest.raises(InvalidLawError):
        mcsim.run(e_deg, 1, (1, 2), replicates=10, master_seed=1)


def test_run_input_validation(e_star):
    with pytest.raises(ValueError):
        mcsim.run(e_star, 3, (1,), 10, 0)
    with pytest.raises(ValueError):
        mcsim.run(e_star, 1, (1,), 0, 0)
    with pytest.raises(ValueError):
        mcsim.run(e_star, 1, (2, 1), 10, 0)
    with pytest.raises(ValueError):
        mcsim.run(e_star, 1, (-1, 2), 10, 0)


def test_result_rows_and_intervals(e_star):
    res = mcsim.run(e_star, 1, (0, 1), replicates=1_000,
                    master_seed=2, threads=1)
    assert res.survival_hat[0] == 1.0  # horizon zero counts everyone
    rows = res.rows()
    assert [r["horizon"] for r in rows] == [0, 1]
    want_keys = {"horizon", "start_type", "survivors", "replicates",
                 "p_hat", "ci_low", "ci_high", "seed"}
    assert set(rows[0]) == want_keys
    lo, hi = res.ci95()
    assert np.all(lo <= res.survival_hat) and np.all(res.survival_hat <= hi)
    # the interval quantile is the exact normal 97.5% point
    assert mcsim._Z95 == pytest.approx(1.959963984540054, rel=1e-12)

"""Verification suite for the long-run behaviour of mean-matrix products.

Every limit statement this package cares about reduces, numerically, to
a scalar sequence that should stabilize: entries of scaled products
measured against spectral-radius products, partial-sum ratios,
approximant products measured against tail products, and sandwich
bounds built from per-step eigenvectors.  Each check here returns a
:class:`LimitDiagnostic` carrying the sequence, the estimated limit, a
stabilization verdict, and (where a claim is a bound rather than a
limit) a :class:`BoundCheck`.  The diagnostics are plain data so the
command line driver can serialize them and tests can assert on them
without re-deriving anything.

Conventions shared by all checks:

* products over the transformed matrices are written with
  ``which="A"``, over the raw mean matrices with ``which="M"``;
* all products and sums are carried in log scale so horizons in the
  thousands stay exact to rounding;
* a sequence counts as stabilized when its last doubling window varies
  by less than ``seqtools.STABLE_REL_TOL`` relatively.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
from typing import Callable, Optional

import numpy as np

from .cfrac import (
    euler_minding,
    row_ratio_coeffs,
    step_ratio_coeffs,
    tail_limit,
    tails_block,
)
from .env import EnvFamily, dtilde_sign_profile, limits, transformed_block
from .matprod import (
    product_scan,
    product_spectral_radius,
    radius_block,
    row_sum_scan,
)
from .seqtools import STABLE_REL_TOL, limit_estimate

#: Limits claimed to be nonzero are accepted when the stabilized
#: estimate clears this magnitude.
NONVANISHING_FLOOR = 1e-8

#: Differences of approximants below this relative size are dropped
#: from ratio tables: past that point the subtraction is rounding
#: noise, not signal (the true gap decays geometrically while the
#: absolute float error stays near machine epsilon).
DIFF_FLOOR = 1e-8


class PreconditionError(ValueError):
    """A check was asked to run on an environment outside its scope."""


# ---------------------------------------------------------------------
# diagnostic containers
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    """Scalar bracket attached to a diagnostic."""

    lower: float
    upper: float
    violated: bool


@dataclass(frozen=True)
class LimitDiagnostic:
    """One verified limit statement.

    ``index`` and ``values`` hold the raw sequence (index is whatever
    natural parameter the statement uses, usually the horizon m or n).
    ``limit_estimate`` is the Aitken-accelerated tail value and
    ``stabilized`` the doubling-window verdict.  ``bound_check`` is
    present only for statements that assert a bracket.
    """

    name: str
    index: np.ndarray
    values: np.ndarray
    limit_estimate: float
    stabilized: bool
    bound_check: Optional[BoundCheck] = None
    notes: str = ""

    @property
    def violated(self) -> bool:
        return self.bound_check is not None and self.bound_check.violated

    def summary(self) -> dict:
        """JSON-ready digest (name, estimate, verdicts, bounds)."""
        out = {
            "name": self.name,
            "limit_estimate": self.limit_estimate,
            "stabilized": self.stabilized,
            "n_points": int(self.values.size),
        }
        if self.bound_check is not None:
            out["bounds"] = {
                "lower": self.bound_check.lower,
                "upper": self.bound_check.upper,
                "violated": self.bound_check.violated,
            }
        if self.notes:
            out["notes"] = self.notes
        return out


def _diag(name: str, index, values, bound_check: Optional[BoundCheck] = None,
          notes: str = "", rel_tol: float = STABLE_REL_TOL) -> LimitDiagnostic:
    vals = np.asarray(values, dtype=float)
    est, stable = limit_estimate(vals, rel_tol)
    return LimitDiagnostic(name, np.asarray(index), vals, est, stable,
                           bound_check, notes)


def _nonvanishing(est: float, stabilized: bool) -> BoundCheck:
    """Bracket for 'limit exists and is not zero' claims.

    The claim fails either when the estimate sits inside the floor or
    when the sequence never stabilized (a drifting sequence with a
    large last value is not evidence of a nonzero limit).
    """
    ok = stabilized and math.isfinite(est) and abs(est) > NONVANISHING_FLOOR
    return BoundCheck(NONVANISHING_FLOOR, math.inf, not ok)


# ---------------------------------------------------------------------
# product entries against radius products
# ---------------------------------------------------------------------

def entry_to_radius_limit(env: EnvFamily, k: int = 1, i: int = 1, j: int = 1,
                          nmax: int = 400) -> LimitDiagnostic:
    """Limit of e_i A_k..A_m e_j^t / prod rho(A_l), m = k..k+nmax-1.

    The scaled entries of the forward products, divided by the running
    product of per-step spectral radii, settle to a nonzero constant;
    the bound check asserts the stabilized estimate clears the
    nonvanishing floor.  Signs are meaningful (second-row entries go
    negative when the transformed lower-left entries do).
    """
    if i not in (1, 2) or j not in (1, 2):
        raise ValueError("i and j index the two types, 1 or 2")
    if k < 1 or nmax < 1:
        raise ValueError("need k >= 1 and nmax >= 1")
    last = k + nmax - 1
    prefixes = product_scan(env, k, last, which="A")
    rho, _ = radius_block(env, k, last, which="A")
    log_rho = np.cumsum(np.log(rho))
    vals = np.empty(nmax)
    for t, p in enumerate(prefixes):
        vals[t] = p.entry(i, j).scaled(-log_rho[t]).to_float()
    est, stable = limit_estimate(vals)
    name = f"entry_to_radius_k{k}_i{i}_j{j}"
    return LimitDiagnostic(name, np.arange(k, last + 1), vals, est, stable,
                           _nonvanishing(est, stable))


def bounded_ratio_report(env: EnvFamily, k: int = 1, nmax: int = 400
                         ) -> tuple[LimitDiagnostic, LimitDiagnostic, LimitDiagnostic]:
    """Boundedness of the corner ratio plus the two product-comparison ratios.

    Returns three diagnostics:

    1. ``entry_ratio_bounds``: x_{k,m} = e_1 A_k..A_m e_1^t / prod rho(A_l)
       with a bracket (min, max) over the sweep; violated when the ratio
       ever leaves (0, inf) or fails to stay bounded.
    2. ``radius_product_ratio``: prod rho(A) / prod rho(M), whose
       stabilized value is the product-comparison constant for the
       transformed family.
    3. ``inverse_sum_ratio``: partial sums of inverse radius products
       of A against those of M, stabilizing to the second comparison
       constant.
    """
    if k < 1 or nmax < 2:
        raise ValueError("need k >= 1 and nmax >= 2")
    base = entry_to_radius_limit(env, k, 1, 1, nmax)
    x = base.values
    lo, hi = float(np.min(x)), float(np.max(x))
    bounded = bool(np.all(np.isfinite(x))) and lo > 0.0
    d_x = LimitDiagnostic(f"entry_ratio_bounds_k{k}", base.index, x,
                          base.limit_estimate, base.stabilized,
                          BoundCheck(lo, hi, not bounded))

    last = k + nmax - 1
    rho_a, _ = radius_block(env, k, last, which="A")
    rho_m, _ = radius_block(env, k, last, which="M")
    la, lm = np.cumsum(np.log(rho_a)), np.cumsum(np.log(rho_m))
    d_c = _diag(f"radius_product_ratio_k{k}", base.index, np.exp(la - lm))

    # partial sums of inverse products; the j = k term is the empty
    # product, so both accumulators start from log 1 = 0
    inv_a = np.logaddexp.accumulate(np.concatenate(([0.0], -la)))
    inv_m = np.logaddexp.accumulate(np.concatenate(([0.0], -lm)))
    d_b = _diag(f"inverse_sum_ratio_k{k}", np.arange(k, last + 2),
                np.exp(inv_a - inv_m))
    return d_x, d_c, d_b


# ---------------------------------------------------------------------
# partial-sum ratio (the denominators of the survival probabilities)
# ---------------------------------------------------------------------

def partial_sum_ratio(env: EnvFamily, nmax: int = 1000) -> LimitDiagnostic:
    """Ratio of entry partial sums to radius partial sums over A.

    sequence n -> sum_{k=1}^{n+1} e_1 A_k..A_n e_1^t
                  / sum_{k=1}^{n+1} rho(A_k)..rho(A_n),
    both sums carried in log scale.  The limit is finite and positive
    whenever the single-step radii settle; for a constant environment
    it equals the (1,1) resolvent entry of the limit matrix divided by
    the limit of the radius sums.
    """
    lim = limits(env)
    if abs(lim.b * lim.d - lim.a * lim.theta) < 1e-15:
        raise PreconditionError("degenerate limit determinant: the ratio "
                                "statement needs b d != a theta")
    if nmax < 2:
        raise ValueError("need nmax >= 2")
    rows, logs = row_sum_scan(env, nmax, inject=(1.0, 0.0), which="A")
    rho, _ = radius_block(env, 1, nmax, which="A")
    lr = np.cumsum(np.log(rho))
    tails = np.logaddexp.accumulate(np.concatenate(([0.0], -lr)))
    ns = np.arange(1, nmax + 1)
    vals = np.empty(nmax)
    for t, n in enumerate(ns):
        log_num = math.log(rows[n, 0]) + logs[n]
        log_den = lr[n - 1] + tails[n]
        vals[t] = math.exp(log_num - log_den)
    est, stable = limit_estimate(vals)
    return LimitDiagnostic("partial_sum_ratio", ns, vals, est, stable,
                           _nonvanishing(est, stable))


# ---------------------------------------------------------------------
# approximant products against tail products
# ---------------------------------------------------------------------

def approximant_product_ratios(env: EnvFamily, nmax: int = 1000
                               ) -> tuple[LimitDiagnostic, LimitDiagnostic, LimitDiagnostic]:
    """Three stabilizing ratios tying approximant products to tails.

    With y_{k,n} the backward column entries of the transformed
    products (so the telescoped approximant product over one sweep
    collapses to 1 / y_{1,n}):

    1. ``approximant_product_vs_radius``: prod rho(A) / y_{1,n}; its
       reciprocal is the corner ratio x_{1,n}, so this diagnostic and
       :func:`entry_to_radius_limit` at (1,1,1) multiply to one.
    2. ``approximant_product_vs_tails``: 1 / (y_{1,n} prod xi_j), the
       approximant product measured against the infinite-tail product.
    3. ``approximant_sum_vs_tail_sum``: partial sums of approximant
       products against partial sums of tail products.

    All three stabilize to positive constants; the bound checks assert
    nonvanishing stabilized limits.
    """
    lim = limits(env)
    if abs(lim.b * lim.d - lim.a * lim.theta) < 1e-15:
        raise PreconditionError("degenerate limit determinant: approximant "
                                "ratio statements need b d != a theta")
    if nmax < 2:
        raise ValueError("need nmax >= 2")
    prefixes = product_scan(env, 1, nmax, which="A")
    rho, _ = radius_block(env, 1, nmax, which="A")
    lr = np.cumsum(np.log(rho))
    xi = tails_block(step_ratio_coeffs(env), nmax, env=env)
    if np.any(xi <= 0.0):
        raise PreconditionError("step tails must be positive for the "
                                "product comparisons")
    lxi = np.cumsum(np.log(xi))
    # partial sums of tail products sum_{k<=n+1} prod_{j<k} xi_j in logs
    sxi = np.logaddexp.accumulate(np.concatenate(([0.0], lxi)))
    num_rows, num_logs = row_sum_scan(env, nmax, inject=(1.0, 0.0), which="A")

    ns = np.arange(1, nmax + 1)
    r1 = np.empty(nmax); r2 = np.empty(nmax); r3 = np.empty(nmax)
    for t, n in enumerate(ns):
        log_y = prefixes[t].entry(1, 1).abs_log()
        r1[t] = math.exp(lr[t] - log_y)
        r2[t] = math.exp(-log_y - lxi[t])
        log_num = math.log(num_rows[n, 0]) + num_logs[n]
        r3[t] = math.exp(log_num - log_y - sxi[n])

    out = []
    for name, vals in (("approximant_product_vs_radius", r1),
                       ("approximant_product_vs_tails", r2),
                       ("approximant_sum_vs_tail_sum", r3)):
        est, stable = limit_estimate(vals)
        out.append(LimitDiagnostic(name, ns, vals, est, stable,
                                   _nonvanishing(est, stable)))
    return tuple(out)


# ---------------------------------------------------------------------
# spectral radius of long products against the product of radii
# ---------------------------------------------------------------------

def _perron_vectors(env: EnvFamily, k: int, m: int) -> np.ndarray:
    """Per-step positive right eigenvectors v_n = (rho(M_n) - theta_n, d_n)."""
    a, b, d, th = env.params_block(k, m)
    rho, cplx = radius_block(env, k, m, which="M")
    if np.any(cplx):
        raise PreconditionError("complex single-step spectrum; no positive "
                                "eigenvectors to build the bracket from")
    v = np.stack([rho - th, d], axis=1)
    if np.any(v <= 0.0):
        raise PreconditionError("eigenvector components must be positive")
    return v


def radius_product_bounds(env: EnvFamily, k: int = 1, m: int = 200) -> LimitDiagnostic:
    """Eigenvector sandwich for rho(M_k..M_m) / prod rho(M_j).

    For each horizon mm in [k, m] the ratio of the product's spectral
    radius to the product of the per-step radii is bracketed by

        zeta_{k,mm} = prod_j min(v_{j+1}/v_j) * min(v_k/v_mm)
        gamma_{k,mm} = prod_j max(v_{j+1}/v_j) * max(v_k/v_mm)

    built from the per-step positive eigenvectors; the products run
    j = k..mm-1 and the min/max are componentwise.  The returned
    diagnostic carries the ratio sequence and a bound check whose
    bracket is the widest-horizon (zeta, gamma); it is violated if any
    horizon escapes its own bracket beyond rounding slack.
    """
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    v = _perron_vectors(env, k, m)
    rho, _ = radius_block(env, k, m, which="M")
    lr = np.cumsum(np.log(rho))
    prefixes = product_scan(env, k, m, which="M")

    count = m - k + 1
    ratios = np.empty(count)
    zetas = np.empty(count)
    gammas = np.empty(count)
    step = v[1:] / v[:-1] if count > 1 else np.empty((0, 2))
    log_min_acc = 0.0
    log_max_acc = 0.0
    violations = 0
    slack = 1e-12
    for t in range(count):
        log_rho_prod, cplx = product_spectral_radius(prefixes[t])
        ratios[t] = math.exp(log_rho_prod - lr[t])
        if t > 0:
            log_min_acc += math.log(np.min(step[t - 1]))
            log_max_acc += math.log(np.max(step[t - 1]))
        ends = v[0] / v[t]
        zetas[t] = math.exp(log_min_acc) * float(np.min(ends))
        gammas[t] = math.exp(log_max_acc) * float(np.max(ends))
        if cplx:
            violations += 1
        if not (zetas[t] * (1.0 - slack) <= ratios[t] <= gammas[t] * (1.0 + slack)):
            violations += 1
    est, stable = limit_estimate(ratios)
    check = BoundCheck(float(zetas[-1]), float(gammas[-1]), violations > 0)
    notes = f"violations={violations}"
    return LimitDiagnostic(f"radius_product_bounds_k{k}", np.arange(k, m + 1),
                           ratios, est, stable, check, notes)


def radius_ratio_limits(env: EnvFamily, k: int = 1, nmax: int = 400
                        ) -> tuple[LimitDiagnostic, LimitDiagnostic]:
    """The two radius-ratio limits at a fixed start index k.

    1. ``radius_to_entry``: rho(A_k..A_m) / e_1 A_k..A_m e_1^t, whose
       limit is 1 + b rho^{-1} xi_k with xi_k the first-row entry tail.
    2. ``radius_to_radius``: rho(A_k..A_n) / rho(M_k..M_n), whose limit
       is the correction factor from :func:`radius_ratio_targets`.

    Both targets are recomputed analytically by
    :func:`radius_ratio_targets`; the suite compares estimate and
    target.
    """
    if k < 1 or nmax < 2:
        raise ValueError("need k >= 1 and nmax >= 2")
    last = k + nmax - 1
    pa = product_scan(env, k, last, which="A")
    pm = product_scan(env, k, last, which="M")
    vals1 = np.empty(nmax)
    vals2 = np.empty(nmax)
    for t in range(nmax):
        log_rho_a, _ = product_spectral_radius(pa[t])
        log_rho_m, _ = product_spectral_radius(pm[t])
        y = pa[t].entry(1, 1)
        vals1[t] = math.exp(log_rho_a - y.abs_log())
        vals2[t] = math.exp(log_rho_a - log_rho_m)
    idx = np.arange(k, last + 1)
    est1, st1 = limit_estimate(vals1)
    est2, st2 = limit_estimate(vals2)
    d1 = LimitDiagnostic(f"radius_to_entry_limit_k{k}", idx, vals1, est1, st1,
                         _nonvanishing(est1, st1))
    d2 = LimitDiagnostic(f"radius_to_radius_limit_k{k}", idx, vals2, est2, st2,
                         _nonvanishing(est2, st2))
    return d1, d2


def radius_ratio_targets(env: EnvFamily, k: int = 1) -> tuple[float, float]:
    """Analytic targets for :func:`radius_ratio_limits` at index k.

    Returns (1 + b rho^{-1} xi_k, phi_k) where xi_k is the first-row
    entry tail at k and phi_k divides that factor by the same factor
    corrected for the local conjugation offset theta_k/b_k - theta/b.
    """
    lim = limits(env)
    xi = tails_block(row_ratio_coeffs(env), k, env=env)[k - 1]
    base = 1.0 + lim.b / lim.rho * xi
    a_k, b_k, d_k, th_k = env.params_at(k)
    corr = base + lim.b / lim.rho * (th_k / b_k - lim.theta / lim.b)
    return base, base / corr


# ---------------------------------------------------------------------
# monotone approximants in the signed-coefficient regime
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    """Outcome of the signed-regime approximant checks.

    ``increment_violations`` counts nonpositive forward increments
    xi_{k,n+1} - xi_{k,n} (signs taken from the exact sign/log
    telescoping, so underflow cannot fake a violation).
    ``tail_bound_violations`` counts approximants that exceed their
    tail beyond rounding slack.  ``ratio_sup`` is the empirical
    supremum of (xi_k - xi_{k,n}) / (xi_{k+1} - xi_{k+1,n}) over the
    reliable part of the table (both gaps above ``DIFF_FLOOR``
    relatively) past the burn-in, and ``ratio_limit`` the analytic
    limit -xi / (alpha + xi) built from the limit coefficients.
    """

    kmax: int
    nmax: int
    burn_in: int
    increment_violations: int
    tail_bound_violations: int
    ratio_sup: float
    ratio_limit: float
    diagnostic: LimitDiagnostic

    @property
    def violated(self) -> bool:
        return (self.increment_violations > 0 or
                self.tail_bound_violations > 0 or
                self.diagnostic.violated)


def approximant_monotonicity_report(env: EnvFamily, kmax: int = 200,
                                    nmax: int = 200) -> MonotonicityReport:
    """Monotone convergence of step approximants when dtilde < 0.

    Scope: environments whose transformed lower-left entries are
    eventually negative (the signed-coefficient regime); anything else
    raises :class:`PreconditionError` because the monotonicity argument
    does not apply there.

    For every k <= kmax the forward sweep to nmax must increase at each
    step and stay below the infinite tail xi_k.  The gap ratio between
    consecutive k is collected where both gaps are numerically
    trustworthy and compared against the analytic limit
    -xi / (alpha + xi) of the limit coefficients.
    """
    profile = dtilde_sign_profile(env)
    if profile != "negative":
        raise PreconditionError("precondition dtilde < 0 fails: the "
                                f"transformed sign profile is {profile!r}")
    if not 1 <= kmax <= nmax:
        raise ValueError("need 1 <= kmax <= nmax")
    coeffs = step_ratio_coeffs(env)
    xi_tail = tails_block(coeffs, kmax + 1, env=env)
    burn = default_burn_in(env)

    inc_viol = 0
    tail_viol = 0
    gaps: list[np.ndarray] = []
    for k in range(1, min(kmax + 1, nmax) + 1):
        em = euler_minding(coeffs, k, nmax)
        if k <= kmax:
            inc_viol += int(np.sum(em.inc_sign <= 0.0))
            if np.any(~np.isfinite(em.xi)):
                tail_viol += 1
            # the approximants approach the tail from below; once the
            # true gap is sub-eps the forward evaluation can overshoot
            # by accumulated rounding (observed ~1e-14 at depth 200),
            # so the strict bound carries a 1e-12 guard
            tol = 1e-12 * max(1.0, abs(xi_tail[k - 1]))
            tail_viol += int(np.sum(em.xi > xi_tail[k - 1] + tol))
        gaps.append(xi_tail[k - 1] - em.xi)

    # gap ratios (xi_k - xi_{k,n}) / (xi_{k+1} - xi_{k+1,n}) on the
    # trustworthy part of the table: both gaps must clear the noise
    # floor past the burn-in and the pair must share the horizon n.
    # The sequence reported is the per-k supremum over admissible n.
    per_k_sup: list[float] = []
    per_k_idx: list[int] = []
    for k in range(max(burn, 1), min(kmax, len(gaps) - 1) + 1):
        gk, gk1 = gaps[k - 1], gaps[k]
        floor = DIFF_FLOOR * max(1.0, abs(xi_tail[k - 1]))
        best = -math.inf
        for n in range(k + 1, nmax + 1):
            num = gk[n - k]
            den = gk1[n - k - 1]
            if abs(num) < floor or abs(den) < floor:
                continue
            best = max(best, num / den)
        if math.isfinite(best):
            per_k_sup.append(best)
            per_k_idx.append(k)

    xi_lim = tail_limit(coeffs)
    ratio_limit = -xi_lim / (coeffs.alpha_limit + xi_lim)
    sup = max(per_k_sup) if per_k_sup else -math.inf
    seq = np.asarray(per_k_sup) if per_k_sup else np.asarray([math.nan])
    idx = np.asarray(per_k_idx) if per_k_idx else np.asarray([0])
    est, stable = limit_estimate(seq)
    check = BoundCheck(-math.inf, ratio_limit + 1e-6,
                       bool(sup > ratio_limit + 1e-6))
    diag = LimitDiagnostic("approximant_gap_ratio", idx, seq, est, stable,
                           check, notes=f"sup={sup!r}")
    return MonotonicityReport(kmax, nmax, burn, inc_viol, tail_viol,
                              float(sup), ratio_limit, diag)


# ---------------------------------------------------------------------
# burn-in rule
# ---------------------------------------------------------------------

def default_burn_in(env: EnvFamily, horizon: int = 500) -> int:
    """First index where the positivity factor and discriminant hold.

    The limit statements at a fixed start index k need
    1 + b rho^{-1} xi_k > 0 (xi_k the first-row entry tail) and a
    positive single-step discriminant.  This returns the first k in
    [1, horizon] where the factor clears 0.1 and the discriminant is
    strictly positive.
    """
    lim = limits(env)
    xi = tails_block(row_ratio_coeffs(env), horizon, env=env)
    factor = 1.0 + lim.b / lim.rho * xi
    atil, btil, dtil = transformed_block(env, 1, horizon)
    disc = atil * atil + 4.0 * btil * dtil
    ok = (factor > 0.1) & (disc > 0.0)
    hits = np.nonzero(ok)[0]
    if hits.size == 0:
        raise RuntimeError(f"no admissible burn-in index within {horizon}")
    return int(hits[0]) + 1


# ---------------------------------------------------------------------
# the suite
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteReport:
    """Everything the verify command emits.

    ``diagnostics`` is the flat, ordered collection (deterministic
    regardless of how many workers ran).  ``cross_link_residual`` is
    |ratio1 * c(1,1,1) - 1| at the final index, ``target_residuals``
    the absolute gaps between the radius-ratio estimates and their
    analytic targets.  ``verification_failures`` counts violated bound
    checks plus failed cross-links; the command line maps it to the
    exit code.
    """

    env_name: str
    nmax: int
    diagnostics: tuple[LimitDiagnostic, ...]
    monotonicity: Optional[MonotonicityReport]
    cross_link_residual: float
    target_residuals: tuple[float, float]
    verification_failures: int

    def all_diagnostics(self) -> tuple[LimitDiagnostic, ...]:
        if self.monotonicity is None:
            return self.diagnostics
        return self.diagnostics + (self.monotonicity.diagnostic,)

    def summary(self) -> dict:
        out = {
            "environment": self.env_name,
            "nmax": self.nmax,
            "cross_link_residual": self.cross_link_residual,
            "target_residuals": list(self.target_residuals),
            "verification_failures": self.verification_failures,
            "diagnostics": [d.summary() for d in self.all_diagnostics()],
        }
        if self.monotonicity is not None:
            m = self.monotonicity
            out["monotonicity"] = {
                "kmax": m.kmax,
                "nmax": m.nmax,
                "burn_in": m.burn_in,
                "increment_violations": m.increment_violations,
                "tail_bound_violations": m.tail_bound_violations,
                "ratio_sup": m.ratio_sup,
                "ratio_limit": m.ratio_limit,
            }
        return out


def run_suite(env: EnvFamily, nmax: int = 1000, threads: int = 4,
              bound_horizon: int = 200) -> SuiteReport:
    """Run every applicable diagnostic and tally verification failures.

    The individual checks are independent, so they are dispatched to a
    small thread pool; results are collected in declaration order, so
    the report is deterministic for a fixed (env, nmax).
    """
    burn = default_burn_in(env)
    jobs: list[tuple[str, Callable[[], object]]] = [
        ("entry", lambda: entry_to_radius_limit(env, 1, 1, 1, min(nmax, 400))),
        ("sums", lambda: partial_sum_ratio(env, nmax)),
        ("products", lambda: approximant_product_ratios(env, nmax)),
        ("bounds", lambda: bounded_ratio_report(env, 1, min(nmax, 400))),
        ("radius", lambda: radius_product_bounds(env, 1, bound_horizon)),
        ("limits", lambda: radius_ratio_limits(env, burn, min(nmax, 400))),
    ]
    mono_applicable = dtilde_sign_profile(env) == "negative"
    if mono_applicable:
        jobs.append(("mono", lambda: approximant_monotonicity_report(
            env, min(bound_horizon, 200), min(bound_horizon, 200))))

    results: dict[str, object] = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {name: pool.submit(fn) for name, fn in jobs}
        for name, fut in futures.items():
            results[name] = fut.result()

    entry = results["entry"]
    sums = results["sums"]
    r1, r2, r3 = results["products"]
    x_diag, c_diag, b_diag = results["bounds"]
    radius = results["radius"]
    lim1, lim2 = results["limits"]
    mono = results.get("mono")

    shared = min(entry.values.size, r1.values.size) - 1
    cross = abs(r1.values[shared] * entry.values[shared] - 1.0)
    t1, t2 = radius_ratio_targets(env, burn)
    res1 = abs(lim1.limit_estimate - t1)
    res2 = abs(lim2.limit_estimate - t2)

    diags = (entry, sums, r1, r2, r3, x_diag, c_diag, b_diag, radius,
             lim1, lim2)
    failures = sum(1 for d in diags if d.violated)
    failures += int(cross > 1e-8)
    failures += int(res1 > 1e-8)
    if mono is not None and mono.violated:
        failures += 1

    return SuiteReport(env.name, nmax, diags, mono, float(cross),
                       (float(res1), float(res2)), failures)

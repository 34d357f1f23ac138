"""Parametric environment families for a 2-type branching process.

An environment is a deterministic sequence of quadruples
``(a_k, b_k, d_k, theta_k)``, ``k >= 1``, giving the mean matrix

    M_k = [[a_k, b_k], [d_k, theta_k]]

of generation ``k``.  The families implemented here are parametric,
converging perturbations of a base quadruple, so that the limit
quantities (limit parameters, limit eigenvalues) exist by construction
and assumptions on the sequence can be checked both numerically and in
closed form:

* ``constant``:   params_k = base
* ``geometric``:  params_k = base + delta * rate**k
* ``power``:      params_k = base + delta * k**(-exponent)
* ``table``:      explicit rows, optionally continued by the base

Standing requirements on every generation: b_k > 0, d_k > 0,
a_k >= 0, theta_k >= 0, a_k + theta_k > 0, and all four entries of
M_k M_{k+1} strictly positive.  Families violating any of these over
the validation horizon are rejected at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .seqtools import limit_estimate, ratio_sequence

KINDS = ("constant", "geometric", "power", "table")

#: Generations validated eagerly at construction time.
VALIDATION_HORIZON = 10_000

#: Differences smaller than this are treated as underflowed when
#: estimating difference quotients.
DIFF_UNDERFLOW = 1e-280

#: Quotients beyond this magnitude are reported as an infinite tau.
TAU_DIVERGENCE = 1e12


class EnvError(ValueError):
    """Invalid environment description or parameter sequence."""


class SequenceUndefinedError(EnvError):
    """A generation beyond a table without a continuation rule."""


def _quad(values, what: str) -> tuple[float, float, float, float]:
    vals = tuple(float(x) for x in values)
    if len(vals) != 4:
        raise EnvError(f"{what} must have exactly four entries (a, b, d, theta)")
    if not all(math.isfinite(x) for x in vals):
        raise EnvError(f"{what} must be finite")
    return vals


@dataclass(frozen=True)
class EnvLimits:
    """Limit parameters and limit eigenvalues of an environment."""

    a: float
    b: float
    d: float
    theta: float
    rho: float   # larger limit eigenvalue, always positive
    rho1: float  # smaller limit eigenvalue, |rho1| < rho

    def as_dict(self) -> dict:
        return {
            "a": self.a, "b": self.b, "d": self.d, "theta": self.theta,
            "rho": self.rho, "rho1": self.rho1,
        }


@dataclass(frozen=True)
class EnvFamily:
    """A parametric environment; immutable and cheap to evaluate."""

    kind: str
    base: tuple[float, float, float, float]
    delta: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    rate: Optional[float] = None
    exponent: Optional[float] = None
    rows: Optional[tuple[tuple[float, float, float, float], ...]] = None
    extend: bool = True
    name: str = ""

    # -- constructors -------------------------------------------------

    @classmethod
    def constant(cls, a, b, d, theta, name: str = "") -> "EnvFamily":
        return cls(kind="constant", base=_quad((a, b, d, theta), "base"), name=name)

    @classmethod
    def geometric(cls, base, delta, rate, name: str = "") -> "EnvFamily":
        return cls(kind="geometric", base=_quad(base, "base"),
                   delta=_quad(delta, "delta"), rate=float(rate), name=name)

    @classmethod
    def power(cls, base, delta, exponent, name: str = "") -> "EnvFamily":
        return cls(kind="power", base=_quad(base, "base"),
                   delta=_quad(delta, "delta"), exponent=float(exponent), name=name)

    @classmethod
    def from_table(cls, rows, base=None, name: str = "") -> "EnvFamily":
        tab = tuple(_quad(r, "table row") for r in rows)
        if not tab:
            raise EnvError("table must contain at least one row")
        if base is None:
            return cls(kind="table", base=tab[-1], rows=tab, extend=False, name=name)
        return cls(kind="table", base=_quad(base, "base"), rows=tab, extend=True, name=name)

    # -- validation ---------------------------------------------------

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EnvError(f"unknown environment kind {self.kind!r}")
        if self.kind == "geometric":
            if self.rate is None or not 0.0 < self.rate < 1.0:
                raise EnvError("geometric kind needs a rate in (0, 1)")
        if self.kind == "power":
            if self.exponent is None or not self.exponent > 1.0:
                raise EnvError("power kind needs an exponent > 1")
        if self.kind == "table" and self.rows is None:
            raise EnvError("table kind needs rows")
        horizon = VALIDATION_HORIZON
        if self.kind == "table" and not self.extend:
            horizon = len(self.rows)
        a, b, d, th = self.params_block(1, horizon)
        if np.any(b <= 0.0) or np.any(d <= 0.0):
            raise EnvError("b_k and d_k must be strictly positive for every k")
        if np.any(a < 0.0) or np.any(th < 0.0):
            raise EnvError("a_k and theta_k must be nonnegative")
        if np.any(a + th <= 0.0):
            raise EnvError("a_k + theta_k must be strictly positive")
        # positivity of every entry of M_k M_{k+1} reduces to these two
        if np.any(a[:-1] + th[1:] <= 0.0) or np.any(a[1:] + th[:-1] <= 0.0):
            raise EnvError("all entries of M_k M_{k+1} must be strictly positive")
        if self.kind != "table" or self.extend:
            la, lb, ld, lth = self.limit_params()
            if lb <= 0.0 or ld <= 0.0 or la < 0.0 or lth < 0.0 or la + lth <= 0.0:
                raise EnvError("limit parameters violate the positivity pattern")

    # -- evaluation ---------------------------------------------------

    def params_at(self, k: int) -> tuple[float, float, float, float]:
        """Parameter quadruple (a_k, b_k, d_k, theta_k) for generation k >= 1."""
        a, b, d, th = self.params_block(k, k)
        return float(a[0]), float(b[0]), float(d[0]), float(th[0])

    def params_block(self, k1: int, k2: int):
        """Vectorized parameters for k in [k1, k2]; four float arrays."""
        if k1 < 1 or k2 < k1:
            raise EnvError(f"invalid generation range [{k1}, {k2}]")
        m = k2 - k1 + 1
        base = np.asarray(self.base, dtype=float)
        if self.kind == "constant":
            out = np.tile(base[:, None], (1, m))
        elif self.kind == "geometric":
            pert = np.asarray(self.delta, dtype=float)[:, None] * self.rate ** np.arange(k1, k2 + 1, dtype=float)[None, :]
            out = base[:, None] + pert
        elif self.kind == "power":
            pert = np.asarray(self.delta, dtype=float)[:, None] * np.arange(k1, k2 + 1, dtype=float)[None, :] ** (-self.exponent)
            out = base[:, None] + pert
        else:  # table
            nrows = len(self.rows)
            if k2 > nrows and not self.extend:
                raise SequenceUndefinedError(
                    f"generation {k2} beyond table of length {nrows} with no continuation rule")
            out = np.empty((4, m), dtype=float)
            tab = np.asarray(self.rows, dtype=float).T  # (4, nrows)
            for j, k in enumerate(range(k1, k2 + 1)):
                out[:, j] = tab[:, k - 1] if k <= nrows else base
        return out[0], out[1], out[2], out[3]

    def limit_params(self) -> tuple[float, float, float, float]:
        """Limit quadruple (a, b, d, theta) as k -> infinity."""
        if self.kind == "table" and not self.extend:
            raise SequenceUndefinedError("table without continuation has no limit parameters")
        return self.base

    def describe(self) -> dict:
        out = {"kind": self.kind, "base": list(self.base), "name": self.name}
        if self.kind in ("geometric", "power"):
            out["delta"] = list(self.delta)
        if self.kind == "geometric":
            out["rate"] = self.rate
        if self.kind == "power":
            out["exponent"] = self.exponent
        if self.kind == "table":
            out["rows"] = [list(r) for r in self.rows]
            out["extend"] = self.extend
        return out


# -- transformed parameters -------------------------------------------

def transformed_block(env: EnvFamily, k1: int, k2: int):
    """Arrays (atilde, btilde, dtilde) for k in [k1, k2].

    The transformed coefficients come from conjugating each mean matrix
    by unit lower-triangular factors so that the (2,2) entry vanishes:

        atilde_k = a_k + b_k * theta_{k+1} / b_{k+1}
        btilde_k = b_k
        dtilde_k = d_k - a_k * theta_k / b_k
    """
    a, b, d, th = env.params_block(k1, k2 + 1)
    atil = a[:-1] + b[:-1] * th[1:] / b[1:]
    btil = b[:-1]
    dtil = d[:-1] - a[:-1] * th[:-1] / b[:-1]
    return atil, btil, dtil


def dtilde_sign_profile(env: EnvFamily, horizon: int = 500) -> str:
    """Sign pattern of dtilde over [1, horizon]: 'positive', 'negative' or 'mixed'."""
    _, _, dtil = transformed_block(env, 1, horizon)
    if np.all(dtil > 0):
        return "positive"
    if np.all(dtil < 0):
        return "negative"
    return "mixed"


# -- condition checks -------------------------------------------------

def variation_partial_sum(env: EnvFamily, K: int) -> float:
    """Partial sum, k = 2..K, of |da_k| + |db_k| + |dd_k| + |dtheta_k|.

    Finiteness of the full sum (plus convergence of the parameters) is
    the summable-variation assumption used throughout.
    """
    if K < 2:
        return 0.0
    a, b, d, th = env.params_block(1, K)
    return float(sum(np.sum(np.abs(np.diff(x))) for x in (a, b, d, th)))


def variation_total_bound(env: EnvFamily) -> float:
    """Exact value (closed form) of the infinite variation sum."""
    if env.kind == "constant":
        return 0.0
    dsum = float(np.sum(np.abs(np.asarray(env.delta, dtype=float))))
    if env.kind == "geometric":
        # |x_k - x_{k-1}| = |delta| rate^{k-1} (1 - rate), summed over k >= 2
        return dsum * env.rate
    if env.kind == "power":
        # |delta| k^{-p} decreases to 0, so the variation telescopes to
        # its k = 1 value
        return dsum * 1.0
    # table: after the rows the sequence is constant (or undefined)
    K = len(env.rows) + (1 if env.extend else 0)
    return variation_partial_sum(env, max(K, 2))


@dataclass(frozen=True)
class DriftReport:
    """Which transformed-coefficient ratios keep moving, and how."""

    drift_class: str                 # none | a_only | d_only | both | inconclusive
    tau: Optional[float]             # limit of d-ratio drift over a-ratio drift (class 'both')
    estimates: dict
    notes: tuple[str, ...] = ()


def excluded_tau_roots(env: EnvFamily) -> tuple[float, float]:
    """The two tau values that the drift condition must avoid."""
    a, b, d, th = env.limit_params()
    disc = (a + th) ** 2 + 4.0 * (b * d - a * th)
    if disc < 0.0:
        raise EnvError("complex limit eigenvalues")
    s = math.sqrt(disc)
    return ((-(a + th) + s) / (2.0 * b), (-(a + th) - s) / (2.0 * b))


def classify_ratio_drift(env: EnvFamily, K: int = 200, eq_tol: float = 1e-12,
                         burn_in: int = 1) -> DriftReport:
    """Classify which of the ratio sequences atilde/btilde and
    dtilde/btilde still drift beyond the burn-in.

    Classes: ``none`` (both eventually constant; outside the drift
    conditions), ``a_only``, ``d_only``, ``both``.  For ``both`` the
    report carries ``tau``, the limit of the quotient of successive
    d-ratio differences over a-ratio differences (may be +-inf), plus
    whether tau avoids the two excluded roots.  Oscillating quotients
    with no stabilization yield ``inconclusive``.
    """
    if K < burn_in + 3:
        raise EnvError("K too small for drift classification")
    atil, btil, dtil = transformed_block(env, 1, K + 1)
    ra = atil / btil
    rd = dtil / btil
    dra = np.diff(ra)[burn_in - 1:]
    drd = np.diff(rd)[burn_in - 1:]
    # differences near the rounding noise of the ratios themselves are
    # dominated by cancellation error; the 1e4 margin keeps only diffs
    # whose relative error stays below ~1e-4, so quotients of kept
    # entries are trustworthy at the stabilization tolerance
    noise_a = 1e4 * np.finfo(float).eps * max(np.max(np.abs(ra)), 1.0)
    noise_d = 1e4 * np.finfo(float).eps * max(np.max(np.abs(rd)), 1.0)
    a_moves = bool(np.max(np.abs(dra)) > eq_tol)
    d_moves = bool(np.max(np.abs(drd)) > eq_tol)
    est: dict = {"max_abs_a_ratio_diff": float(np.max(np.abs(dra))),
                 "max_abs_d_ratio_diff": float(np.max(np.abs(drd)))}
    notes: list[str] = []

    def second_quotient(diffs, noise):
        kept = diffs[np.abs(diffs) > noise]
        q = ratio_sequence(kept, floor=DIFF_UNDERFLOW)
        if q.size < 3:
            return None, False
        val, ok = limit_estimate(q)
        return float(val), ok

    if not a_moves and not d_moves:
        notes.append("both ratio sequences constant beyond burn-in; outside the drift conditions")
        return DriftReport("none", None, est, tuple(notes))

    if not a_moves or not d_moves:
        cls = "d_only" if d_moves else "a_only"
        q, ok = second_quotient(drd if d_moves else dra, noise_d if d_moves else noise_a)
        est["second_difference_quotient"] = q
        est["second_difference_quotient_stabilized"] = ok
        if not ok:
            notes.append("difference quotient did not stabilize")
            return DriftReport("inconclusive", None, est, tuple(notes))
        return DriftReport(cls, None, est, tuple(notes))

    # both move: estimate tau = lim (d-ratio diff) / (a-ratio diff)
    mask = (np.abs(dra) > noise_a) & (np.abs(drd) > noise_d)
    quot = drd[mask] / dra[mask]
    if quot.size < 3:
        notes.append("too few reliable difference pairs to estimate tau")
        return DriftReport("inconclusive", None, est, tuple(notes))
    tau, ok = limit_estimate(quot)
    if not ok:
        tail = quot[-8:] if quot.size >= 8 else quot
        mags = np.abs(tail)
        one_sign = bool(np.all(np.sign(tail) == np.sign(tail[-1])))
        growing = (mags.size >= 4 and one_sign
                   and bool(np.all(np.diff(mags) > 0))
                   and mags[-1] > 4.0 * mags[0])
        if growing or abs(quot[-1]) > TAU_DIVERGENCE:
            tau = math.copysign(math.inf, quot[-1])
            ok = True
            notes.append("tau quotient diverges; reported as signed infinity")
        else:
            notes.append("tau quotient did not stabilize")
            return DriftReport("inconclusive", None, est, tuple(notes))
    # with finite tau the side condition concerns the a-ratio second
    # quotient; with infinite tau it moves to the d-ratio
    if math.isfinite(tau):
        q2, q2ok = second_quotient(dra, noise_a)
    else:
        q2, q2ok = second_quotient(drd, noise_d)
    est["second_difference_quotient"] = q2
    est["second_difference_quotient_stabilized"] = q2ok
    roots = excluded_tau_roots(env)
    est["excluded_tau_roots"] = roots
    admissible = all(not math.isclose(tau, r, rel_tol=1e-9, abs_tol=1e-12) for r in roots) \
        if math.isfinite(tau) else True
    est["tau_admissible"] = admissible
    if not admissible:
        notes.append("tau coincides with an excluded root")
    return DriftReport("both", float(tau), est, tuple(notes))


def limits(env: EnvFamily) -> EnvLimits:
    """Limit parameters together with the limit eigenvalues.

    rho and rho1 are the roots of x**2 - (a + theta) x - (b d - a theta),
    ordered rho > |rho1|.
    """
    a, b, d, th = env.limit_params()
    disc = (a + th) ** 2 + 4.0 * (b * d - a * th)
    if disc < 0.0:
        raise EnvError("complex limit eigenvalues")
    s = math.sqrt(disc)
    rho = (a + th + s) / 2.0
    rho1 = (a + th - s) / 2.0
    return EnvLimits(a, b, d, th, rho, rho1)


@dataclass(frozen=True)
class DegeneracyReport:
    """Whether the limit parameters sit on the degenerate manifold where
    the leading term of the extinction-time mass function vanishes."""

    degenerate: bool
    candidate: Optional[float]
    shortcut: Optional[bool]   # theta == b + 1 test, meaningful when b d > a theta
    diagnostic: str

    def __bool__(self) -> bool:
        return self.degenerate


def degeneracy_flag(env: EnvFamily, tol: float = 1e-9) -> DegeneracyReport:
    """Test rho1 == (a+b+1 - sqrt((a+b+1)^2 + 4(bd-a theta)/(theta-b)))/2.

    Requires theta != b (the candidate divides by theta - b).  When
    b d > a theta the criterion reduces to theta == b + 1, reported as
    ``shortcut``.
    """
    a, b, d, th = env.limit_params()
    if math.isclose(th, b, rel_tol=0.0, abs_tol=1e-15):
        raise EnvError("degeneracy criterion undefined when theta equals b")
    lim = limits(env)
    shortcut = None
    if b * d > a * th:
        shortcut = bool(abs(th - (b + 1.0)) <= tol)
    rad = (a + b + 1.0) ** 2 + 4.0 * (b * d - a * th) / (th - b)
    if rad < 0.0:
        return DegeneracyReport(False, None, shortcut, "negative radicand")
    cand = 0.5 * (a + b + 1.0 - math.sqrt(rad))
    deg = bool(abs(lim.rho1 - cand) <= tol)
    return DegeneracyReport(deg, cand, shortcut, "matched" if deg else "candidate differs from rho1")


# -- named fixtures ---------------------------------------------------

E_STAR = EnvFamily.constant(0.2, 0.3, 0.4, 0.1, name="E_star")
E_MINUS = EnvFamily.constant(0.4, 0.2, 0.1, 0.3, name="E_minus")
E_TRI_UP = EnvFamily.geometric((0.2, 0.3, 0.4, 0.1), (0.05, 0.0, 0.0, 0.0), 0.5, name="E_tri_up")
E_TRI_DOWN = EnvFamily.geometric((0.4, 0.2, 0.1, 0.3), (0.05, 0.0, 0.0, 0.0), 0.5, name="E_tri_down")
E_DEG = EnvFamily.constant(0.1, 0.3, 2.0, 1.3, name="E_deg")

FIXTURES = {f.name: f for f in (E_STAR, E_MINUS, E_TRI_UP, E_TRI_DOWN, E_DEG)}


def fixture(name: str) -> EnvFamily:
    """Look up a built-in fixture by name."""
    try:
        return FIXTURES[name]
    except KeyError:
        raise EnvError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}") from None

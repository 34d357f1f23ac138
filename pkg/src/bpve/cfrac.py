"""Continued fractions attached to products of the transformed matrices.

Three coefficient streams recur, all built from the transformed
parameters (atilde, btilde, dtilde); each is the exact expansion of a
ratio of product entries, which is what makes cross-checks against
matrix products possible:

* ``step_ratio``:   alpha_k = atilde_k / (btilde_k dtilde_{k+1}),
  beta_k = 1 / (btilde_k dtilde_{k+1}).  The approximant xi_{k,n}
  equals y_{k+1,n} / y_{k,n} with y_{j,n} = e1 A_j ... A_n e1^t;
  tails converge to 1/rho.
* ``row_ratio``:    alpha_k = atilde_k / btilde_k,
  beta_k = dtilde_k / btilde_k.  The approximant equals the (2,1)
  over (1,1) entry ratio of A_k ... A_m; tails converge to -rho1/b.
* ``column_ratio``: alpha_k = atilde_k / dtilde_k,
  beta_k = btilde_k / dtilde_k, evaluated descending (innermost term
  beta_1/alpha_1).  The value equals the (1,2) over (1,1) entry ratio
  of A_1 ... A_k and converges to b/rho.

All evaluation is plain float; products that risk overflow go through
:mod:`bpve.matprod`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .env import EnvFamily, transformed_block
from .matprod import column_scan, radius_block, scaled_product
from .seqtools import limit_estimate, ratio_sequence

#: Denominators smaller than this make an approximant numerically singular.
SINGULAR_THRESHOLD = 1e-280

#: Joint renormalization threshold for streamed numerators/denominators.
_RENORM = 1e150

#: Magnitudes below this are treated as an identically zero sequence.
_ZERO_FLOOR = 1e-14


class SingularApproximantError(ArithmeticError):
    """A continued fraction denominator vanished along the way."""


class TailNotConvergedError(RuntimeError):
    """Forward evaluation of a tail failed to settle within the budget."""


# ---------------------------------------------------------------------
# coefficient streams
# ---------------------------------------------------------------------

class CFCoeffs:
    """A stream of continued fraction coefficients (alpha_k, beta_k)."""

    def __init__(self, provenance: str, block: Callable, alpha_limit: float,
                 beta_limit: float, descending: bool = False):
        self.provenance = provenance
        self._block = block
        self.alpha_limit = float(alpha_limit)
        self.beta_limit = float(beta_limit)
        self.descending = descending

    def blocks(self, k1: int, k2: int):
        """(alpha, beta) arrays for k in [k1, k2]."""
        return self._block(k1, k2)

    def at(self, k: int) -> tuple[float, float]:
        a, b = self._block(k, k)
        return float(a[0]), float(b[0])

    def __repr__(self) -> str:
        return f"CFCoeffs({self.provenance!r})"


def step_ratio_coeffs(env: EnvFamily) -> CFCoeffs:
    def block(k1, k2):
        atil, btil, _ = transformed_block(env, k1, k2)
        _, _, dnext = transformed_block(env, k1 + 1, k2 + 1)
        denom = btil * dnext
        return atil / denom, 1.0 / denom

    la, lb, ld, lth = env.limit_params()
    det = lb * ld - la * lth
    return CFCoeffs("step_ratio", block, (la + lth) / det, 1.0 / det)


def row_ratio_coeffs(env: EnvFamily) -> CFCoeffs:
    def block(k1, k2):
        atil, btil, dtil = transformed_block(env, k1, k2)
        return atil / btil, dtil / btil

    la, lb, ld, lth = env.limit_params()
    return CFCoeffs("row_ratio", block, (la + lth) / lb, (lb * ld - la * lth) / lb ** 2)


def column_ratio_coeffs(env: EnvFamily) -> CFCoeffs:
    def block(k1, k2):
        atil, btil, dtil = transformed_block(env, k1, k2)
        return atil / dtil, btil / dtil

    la, lb, ld, lth = env.limit_params()
    det = lb * ld - la * lth
    return CFCoeffs("column_ratio", block, lb * (la + lth) / det, lb ** 2 / det,
                    descending=True)


def custom_coeffs(alpha_at: Callable[[int], float], beta_at: Callable[[int], float],
                  alpha_limit: float, beta_limit: float,
                  descending: bool = False) -> CFCoeffs:
    """Wrap per-index callables as a coefficient stream."""

    def block(k1, k2):
        ks = range(k1, k2 + 1)
        return (np.array([alpha_at(k) for k in ks], dtype=float),
                np.array([beta_at(k) for k in ks], dtype=float))

    return CFCoeffs("custom", block, alpha_limit, beta_limit, descending)


def coeffs_for(env: EnvFamily, provenance: str) -> CFCoeffs:
    factory = {"step_ratio": step_ratio_coeffs, "row_ratio": row_ratio_coeffs,
               "column_ratio": column_ratio_coeffs}.get(provenance)
    if factory is None:
        raise ValueError(f"unknown provenance {provenance!r}")
    return factory(env)


# ---------------------------------------------------------------------
# finite approximants
# ---------------------------------------------------------------------

def approximant(coeffs: CFCoeffs, k: int, n: int) -> float:
    """xi_{k,n} = beta_k / (alpha_k + beta_{k+1} / (... + beta_n / alpha_n)).

    Evaluated backward, which is exact for a finite approximant.
    """
    if n < k:
        raise ValueError("approximant needs n >= k")
    alpha, beta = coeffs.blocks(k, n)
    t = 0.0
    for j in range(n - k, -1, -1):
        den = alpha[j] + t
        if abs(den) < SINGULAR_THRESHOLD:
            raise SingularApproximantError(
                f"vanishing denominator at level {k + j} of xi_{{{k},{n}}}")
        t = beta[j] / den
    return float(t)


def approximant_sweep(coeffs: CFCoeffs, k: int, n: int) -> np.ndarray:
    """All approximants xi_{k,m}, m = k..n, via one forward recursion."""
    em = euler_minding(coeffs, k, n)
    return em.xi


def critical_tail(coeffs: CFCoeffs, k: int) -> float:
    """h_k = beta_k / (alpha_{k-1} + beta_{k-1} / (... + beta_2 / alpha_1)).

    Defined for k >= 2; shares the limit of the tails when the
    coefficients converge.
    """
    if k < 2:
        raise ValueError("critical tail needs k >= 2")
    alpha, beta = coeffs.blocks(1, k)
    t = 0.0
    for j in range(2, k + 1):  # innermost level first: beta_2 / alpha_1
        den = alpha[j - 2] + t
        if abs(den) < SINGULAR_THRESHOLD:
            raise SingularApproximantError(f"vanishing denominator in h_{k}")
        t = beta[j - 1] / den
    return float(t)


def h_ratio(coeffs: CFCoeffs, m: int, k: int) -> float:
    """h_{m,k} = 1 / (alpha_m + beta_m / (... + beta_{k+1} / alpha_k)), m >= k.

    With the row family this is the (1,2) over (1,1) entry ratio of
    A_k ... A_m; it tends to b/rho as m grows.
    """
    if m < k:
        raise ValueError("h_ratio needs m >= k")
    alpha, beta = coeffs.blocks(k, m)
    t = 0.0
    for j in range(k, m + 1):  # innermost level first: beta_{k+1} / alpha_k
        den = alpha[j - k] + t
        if abs(den) < SINGULAR_THRESHOLD:
            raise SingularApproximantError(f"vanishing denominator in h_{{{m},{k}}}")
        t = (beta[j - k + 1] if j < m else 1.0) / den
    return float(t)


def column_value(coeffs: CFCoeffs, k: int) -> float:
    """beta_k / (alpha_k + beta_{k-1} / (... + beta_1 / alpha_1)).

    The descending pattern of the column family; equals the forward
    recursion f_j = beta_j / (alpha_j + f_{j-1}) with f_0 = 0.
    """
    alpha, beta = coeffs.blocks(1, k)
    t = 0.0
    for j in range(k):
        den = alpha[j] + t
        if abs(den) < SINGULAR_THRESHOLD:
            raise SingularApproximantError(f"vanishing denominator at level {j + 1}")
        t = beta[j] / den
    return float(t)


# ---------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------

def tail_limit(coeffs: CFCoeffs) -> float:
    """Limit of the tails when the coefficients converge:
    (alpha/2) (sqrt(1 + 4 beta / alpha**2) - 1)."""
    a, b = coeffs.alpha_limit, coeffs.beta_limit
    if a == 0.0:
        raise ValueError("tail limit undefined for vanishing alpha limit")
    rad = 1.0 + 4.0 * b / (a * a)
    if rad < 0.0:
        raise ValueError("tail limit undefined: negative discriminant")
    return (a / 2.0) * (math.sqrt(rad) - 1.0)


def tail(coeffs: CFCoeffs, k: int, tol: float = 1e-13, window: int = 5,
         nmax: int = 100_000) -> float:
    """xi_k as the limit of xi_{k,n}, streamed forward in n.

    Numerators and denominators follow the standard three-term
    recursion, renormalized jointly; convergence is declared when the
    last ``window`` approximants agree within ``tol`` (absolute, with a
    relative widening for large values).
    """
    c_prev, c_curr = 1.0, 0.0   # C_{k,k-2}, C_{k,k-1}
    d_prev, d_curr = 0.0, 1.0   # D_{k,k-2}, D_{k,k-1}
    recent: list[float] = []
    chunk = 1024
    j = k
    while j <= k + nmax:
        alpha, beta = coeffs.blocks(j, min(j + chunk - 1, k + nmax))
        for i in range(alpha.size):
            c_prev, c_curr = c_curr, alpha[i] * c_curr + beta[i] * c_prev
            d_prev, d_curr = d_curr, alpha[i] * d_curr + beta[i] * d_prev
            m = max(abs(c_curr), abs(d_curr), abs(c_prev), abs(d_prev))
            if m > _RENORM or 0.0 < m < 1.0 / _RENORM:
                c_prev /= m; c_curr /= m; d_prev /= m; d_curr /= m
            if abs(d_curr) >= SINGULAR_THRESHOLD * max(1.0, abs(c_curr)):
                x = c_curr / d_curr
                recent.append(x)
                if len(recent) > window + 1:
                    recent.pop(0)
                if len(recent) == window + 1:
                    ref = recent[-1]
                    spread = max(abs(v - ref) for v in recent)
                    if spread <= tol * max(1.0, abs(ref)):
                        return float(ref)
        j += alpha.size
    raise TailNotConvergedError(
        f"tail xi_{k} did not settle within {nmax} levels (tol {tol})")


def tails_block(coeffs: CFCoeffs, K: int, env: Optional[EnvFamily] = None,
                target: float = 1e-18) -> np.ndarray:
    """xi_k for k = 1..K in one backward sweep from a deep seed.

    The backward step xi_k = beta_k / (alpha_k + xi_{k+1}) contracts
    toward the true tail at the asymptotic rate |rho1|/rho < 1, so a
    seed error of order one dies out within a computable burn-in.
    """
    rate = None
    if env is not None:
        from .env import limits as _limits
        lim = _limits(env)
        rate = abs(lim.rho1) / lim.rho
    if rate is None or not 0.0 < rate < 1.0:
        burn = 512
    else:
        burn = int(min(4096, max(64, math.ceil(math.log(target) / math.log(rate)))))
    seed = tail_limit(coeffs)
    alpha, beta = coeffs.blocks(1, K + burn)
    t = seed
    out = np.empty(K)
    for j in range(K + burn - 1, -1, -1):
        den = alpha[j] + t
        if abs(den) < SINGULAR_THRESHOLD:
            raise SingularApproximantError(f"vanishing denominator at level {j + 1}")
        t = beta[j] / den
        if j < K:
            out[j] = t
    return out


# ---------------------------------------------------------------------
# Euler-Minding form: approximants, denominators, telescoping increments
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class EulerMinding:
    """Forward state of a continued fraction in three-term form.

    All arrays are indexed by m = k..n (position m - k).  Numerators C
    and denominators D carry a shared log scale; the telescoping
    increments xi_{k,m+1} - xi_{k,m} are reported in sign/log form so
    they stay meaningful long after floats would underflow.
    """

    k: int
    n: int
    xi: np.ndarray          # approximants xi_{k,m}; nan where D vanished
    c_sign: np.ndarray
    c_log: np.ndarray
    d_sign: np.ndarray
    d_log: np.ndarray
    inc_sign: np.ndarray    # increments for m = k..n-1 (length n-k)
    inc_log: np.ndarray

    def increments(self) -> np.ndarray:
        return self.inc_sign * np.exp(self.inc_log)


def euler_minding(coeffs: CFCoeffs, k: int, n: int) -> EulerMinding:
    if n < k:
        raise ValueError("euler_minding needs n >= k")
    alpha, beta = coeffs.blocks(k, n)
    m = n - k + 1
    xi = np.full(m, np.nan)
    c_sign = np.zeros(m); c_log = np.full(m, -np.inf)
    d_sign = np.zeros(m); d_log = np.full(m, -np.inf)
    inc_sign = np.zeros(max(m - 1, 0)); inc_log = np.full(max(m - 1, 0), -np.inf)

    c_prev, c_curr = 1.0, 0.0
    d_prev, d_curr = 0.0, 1.0
    scale = 0.0                      # shared log scale of C, D
    neg_beta_sign = 1                # sign of prod (-beta_i), i = k..j
    neg_beta_log = 0.0               # log |prod beta_i|
    prev_d_sign, prev_d_log = 0, -math.inf

    for j in range(m):
        c_prev, c_curr = c_curr, alpha[j] * c_curr + beta[j] * c_prev
        d_prev, d_curr = d_curr, alpha[j] * d_curr + beta[j] * d_prev
        mm = max(abs(c_curr), abs(d_curr), abs(c_prev), abs(d_prev))
        if mm > _RENORM or (0.0 < mm < 1.0 / _RENORM):
            c_prev /= mm; c_curr /= mm; d_prev /= mm; d_curr /= mm
            scale += math.log(mm)
        nb = -beta[j]
        neg_beta_sign *= (1 if nb > 0 else -1 if nb < 0 else 0)
        neg_beta_log += math.log(abs(nb)) if nb != 0.0 else -math.inf

        c_sign[j] = math.copysign(1.0, c_curr) if c_curr != 0.0 else 0.0
        c_log[j] = (math.log(abs(c_curr)) + scale) if c_curr != 0.0 else -math.inf
        d_sign[j] = math.copysign(1.0, d_curr) if d_curr != 0.0 else 0.0
        d_log[j] = (math.log(abs(d_curr)) + scale) if d_curr != 0.0 else -math.inf
        if abs(d_curr) >= SINGULAR_THRESHOLD * max(1.0, abs(c_curr)):
            xi[j] = c_curr / d_curr
        if j >= 1:
            # xi_{k,m+1} - xi_{k,m} = -prod_{i=k}^{m+1} (-beta_i) / (D_{m+1} D_m)
            s = -neg_beta_sign * d_sign[j] * d_sign[j - 1]
            inc_sign[j - 1] = s
            inc_log[j - 1] = (neg_beta_log - d_log[j] - d_log[j - 1]
                              if s != 0 else -math.inf)
    return EulerMinding(k, n, xi, c_sign, c_log, d_sign, d_log, inc_sign, inc_log)


# ---------------------------------------------------------------------
# matrix bridges and entry-ratio recursions
# ---------------------------------------------------------------------

def matrix_bridge(env: EnvFamily, provenance: str, k: int, n: int) -> float:
    """Evaluate the same ratio a coefficient stream expands, but from
    log-scaled matrix products; disagreement with the continued
    fraction evaluation indicates a numerical problem.
    """
    if provenance == "step_ratio":
        cols, logs = column_scan(env, k, n, (1.0, 0.0), which="A")
        y_k, y_k1 = cols[0, 0], cols[1, 0]
        if abs(y_k) < SINGULAR_THRESHOLD:
            raise SingularApproximantError(f"y_{{{k},{n}}} vanished")
        return float(y_k1 / y_k * math.exp(logs[1] - logs[0]))
    if provenance == "row_ratio":
        p = scaled_product(env, k, n, which="A")
        if abs(p.mat[0, 0]) < SINGULAR_THRESHOLD:
            raise SingularApproximantError("corner entry vanished")
        return float(p.mat[1, 0] / p.mat[0, 0])
    if provenance == "column_ratio":
        p = scaled_product(env, 1, k, which="A")
        if abs(p.mat[0, 0]) < SINGULAR_THRESHOLD:
            raise SingularApproximantError("corner entry vanished")
        return float(p.mat[0, 1] / p.mat[0, 0])
    raise ValueError(f"unknown provenance {provenance!r}")


def entry_ratio_recursion(env: EnvFamily, n: int, row: int = 1) -> np.ndarray:
    """f_j, j = 1..n, from f_j = btilde_j / (atilde_j + dtilde_j f_{j-1}).

    ``row=1`` starts from f_1 = btilde_1/atilde_1 and tracks the ratio
    of first-row product entries; ``row=2`` starts from f_1 = 0 and
    tracks the second-row entries.  Both share the limit b/rho.
    """
    if row not in (1, 2):
        raise ValueError("row must be 1 or 2")
    atil, btil, dtil = transformed_block(env, 1, n)
    out = np.empty(n)
    if row == 1:
        if abs(atil[0]) < SINGULAR_THRESHOLD:
            raise SingularApproximantError("atilde_1 vanished")
        f = btil[0] / atil[0]
    else:
        f = 0.0
    out[0] = f
    for j in range(1, n):
        den = atil[j] + dtil[j] * f
        if abs(den) < SINGULAR_THRESHOLD:
            raise SingularApproximantError(f"vanishing denominator at level {j + 1}")
        f = btil[j] / den
        out[j] = f
    return out


# ---------------------------------------------------------------------
# fluctuations around the frozen-coefficient fixed points
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class FluctuationSeq:
    """Deviations of entry ratios and tails from single-matrix radii.

    eps_f[k-1]    = f_k - btilde_{k+1} / rho(A_{k+1}),       k = 1..K
    eps_xi[k-1]   = xi_k - 1 / rho(A_k),                     k = 1..K
    delta_f[k-2]  = btilde_k/dtilde_k
                    - (btilde_{k+1}/rho(A_{k+1}))
                      (atilde_k/dtilde_k + btilde_k/rho(A_k)), k = 2..K
    delta_xi[k-1] = 1/(btilde_k dtilde_{k+1})
                    - (1/rho(A_k))
                      (atilde_k/(btilde_k dtilde_{k+1}) + 1/rho(A_{k+1}))

    The successive-ratio limits of the two delta sequences share a
    common value q with |q| <= 1; the eps_f ratio converges to q or to
    (a theta - b d)/rho**2.
    """

    eps_f: np.ndarray
    eps_xi: np.ndarray
    delta_f: np.ndarray
    delta_xi: np.ndarray
    q_hat_delta_f: Optional[float]
    q_hat_delta_xi: Optional[float]
    q_hat_eps_f: Optional[float]
    q_hat_eps_xi: Optional[float]
    eps_f_alt_ratio: float
    notes: tuple[str, ...]


def _ratio_limit(seq: np.ndarray, what: str, notes: list[str]) -> Optional[float]:
    scale = float(np.max(np.abs(seq))) if seq.size else 0.0
    if scale <= _ZERO_FLOOR:
        notes.append(f"{what} identically zero")
        return None
    # The entries are differences of order-one quantities, so their
    # absolute noise is a few ulps of one; ratios of entries below this
    # floor are meaningless.  Truncate at the first such entry rather
    # than masking, which would stitch ratios across the gap.
    floor = 1e4 * np.finfo(float).eps * max(1.0, scale)
    below = np.nonzero(np.abs(seq) < floor)[0]
    live = seq[:below[0]] if below.size else seq
    ratios = ratio_sequence(live)
    if ratios.size < 3:
        notes.append(f"{what} underflows before a ratio limit forms")
        return None
    val, ok = limit_estimate(ratios)
    if not ok:
        notes.append(f"{what} ratio did not stabilize")
    return float(val)


def fluctuations(env: EnvFamily, K: int) -> FluctuationSeq:
    if K < 4:
        raise ValueError("K too small for fluctuation analysis")
    atil, btil, dtil = transformed_block(env, 1, K + 1)
    rho, cplx = radius_block(env, 1, K + 1, which="A")
    notes: list[str] = []
    if bool(np.any(cplx)):
        notes.append("some single-matrix eigenvalue pairs are complex; "
                     "their radii enter the fixed-point comparisons as moduli")

    f = entry_ratio_recursion(env, K, row=1)
    eps_f = f - btil[1:K + 1] / rho[1:K + 1]

    xi = tails_block(step_ratio_coeffs(env), K, env=env)
    eps_xi = xi - 1.0 / rho[:K]

    ks = np.arange(2, K + 1) - 1   # 0-based indices for k = 2..K
    delta_f = (btil[ks] / dtil[ks]
               - (btil[ks + 1] / rho[ks + 1]) * (atil[ks] / dtil[ks] + btil[ks] / rho[ks]))
    j = np.arange(0, K)            # k = 1..K
    bd_next = btil[j] * dtil[j + 1]
    delta_xi = 1.0 / bd_next - (1.0 / rho[j]) * (atil[j] / bd_next + 1.0 / rho[j + 1])

    q_df = _ratio_limit(delta_f, "delta_f", notes)
    q_dxi = _ratio_limit(delta_xi, "delta_xi", notes)
    q_ef = _ratio_limit(eps_f, "eps_f", notes)
    q_exi = _ratio_limit(eps_xi, "eps_xi", notes)

    la, lb, ld, lth = env.limit_params()
    from .env import limits as _limits
    lim = _limits(env)
    alt = (la * lth - lb * ld) / lim.rho ** 2

    return FluctuationSeq(eps_f, eps_xi, delta_f, delta_xi,
                          q_df, q_dxi, q_ef, q_exi, alt, tuple(notes))

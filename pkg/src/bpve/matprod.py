"""Stable products of 2x2 mean matrices and their companions.

Two matrix families appear throughout the package:

* ``M_k = [[a_k, b_k], [d_k, theta_k]]``, the raw mean matrices;
* ``A_k = [[atilde_k, btilde_k], [dtilde_k, 0]]``, obtained by
  conjugating ``M_k`` with unit lower-triangular factors
  ``L_k = [[1, 0], [theta_k / b_k, 1]]`` via ``A_k = L_k^-1 M_k L_{k+1}``.

Long products of either family grow or decay geometrically, so every
routine here carries a separate log scale next to an O(1) matrix or
vector.  Scalars that may carry a sign (entries of A-products can be
negative) travel as ``LogScalar`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .env import EnvFamily, transformed_block
from .seqtools import neumaier_sum

_EPS = np.finfo(float).eps


class ScalingError(RuntimeError):
    """A product lost all scale information (zero, inf or nan)."""


# ---------------------------------------------------------------------
# signed log-domain scalars
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class LogScalar:
    """A real number stored as (sign, log of magnitude)."""

    sign: int    # -1, 0, +1
    log: float   # log(abs(value)); -inf when sign == 0

    ZERO: ClassVar["LogScalar"]
    ONE: ClassVar["LogScalar"]

    @staticmethod
    def of(x: float) -> "LogScalar":
        x = float(x)
        if x == 0.0:
            return LogScalar.ZERO
        return LogScalar(1 if x > 0 else -1, math.log(abs(x)))

    def scaled(self, log_shift: float) -> "LogScalar":
        if self.sign == 0:
            return self
        return LogScalar(self.sign, self.log + log_shift)

    def mul(self, other: "LogScalar") -> "LogScalar":
        if self.sign == 0 or other.sign == 0:
            return LogScalar.ZERO
        return LogScalar(self.sign * other.sign, self.log + other.log)

    def div(self, other: "LogScalar") -> "LogScalar":
        if other.sign == 0:
            raise ZeroDivisionError("LogScalar division by zero")
        if self.sign == 0:
            return LogScalar.ZERO
        return LogScalar(self.sign * other.sign, self.log - other.log)

    def add(self, other: "LogScalar") -> "LogScalar":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log >= other.log else (other, self)
        diff = lo.log - hi.log  # <= 0
        if self.sign == other.sign:
            return LogScalar(hi.sign, hi.log + math.log1p(math.exp(diff)))
        if diff == 0.0:
            return LogScalar.ZERO
        # 1 - exp(diff) through expm1: exp(diff) alone rounds to 1.0
        # once diff is below about -1e-16, which would put a spurious
        # zero (and a log domain error) where a tiny difference belongs
        return LogScalar(hi.sign, hi.log + math.log(-math.expm1(diff)))

    def neg(self) -> "LogScalar":
        return LogScalar(-self.sign, self.log)

    def sub(self, other: "LogScalar") -> "LogScalar":
        return self.add(other.neg())

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log)

    def abs_log(self) -> float:
        return self.log

    __mul__ = mul
    __truediv__ = div
    __add__ = add
    __sub__ = sub
    __neg__ = neg


LogScalar.ZERO = LogScalar(0, float("-inf"))
LogScalar.ONE = LogScalar(1, 0.0)


def logscalar_sum(values) -> LogScalar:
    """Sum of LogScalars, accumulated pairwise from the largest down."""
    acc = LogScalar.ZERO
    for v in sorted(values, key=lambda t: t.log, reverse=True):
        acc = acc.add(v)
    return acc


# ---------------------------------------------------------------------
# single matrices
# ---------------------------------------------------------------------

def mean_matrix(env: EnvFamily, k: int) -> np.ndarray:
    a, b, d, th = env.params_at(k)
    return np.array([[a, b], [d, th]], dtype=float)


def transformed_matrix(env: EnvFamily, k: int) -> np.ndarray:
    atil, btil, dtil = transformed_block(env, k, k)
    return np.array([[atil[0], btil[0]], [dtil[0], 0.0]], dtype=float)


def lower_conjugator(env: EnvFamily, k: int) -> np.ndarray:
    _, b, _, th = env.params_at(k)
    return np.array([[1.0, 0.0], [th / b, 1.0]], dtype=float)


def conjugation_residual(env: EnvFamily, k: int) -> float:
    """max |A_k - L_k^-1 M_k L_{k+1}|; a rounding-level sanity number."""
    lk = lower_conjugator(env, k)
    lk1 = lower_conjugator(env, k + 1)
    recon = np.linalg.solve(lk, mean_matrix(env, k)) @ lk1
    return float(np.max(np.abs(transformed_matrix(env, k) - recon)))


@dataclass(frozen=True)
class SpectralPair:
    """Spectral radius of a real 2x2 matrix plus how it arose."""

    rho: float
    disc: float          # discriminant of the characteristic polynomial
    complex_pair: bool   # True when the eigenvalues are conjugate complex


def spectral_radius(mat: np.ndarray) -> SpectralPair:
    tr = float(mat[0, 0] + mat[1, 1])
    det = float(mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0])
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        return SpectralPair((abs(tr) + math.sqrt(disc)) / 2.0, disc, False)
    return SpectralPair(math.sqrt(det), disc, True)


def radius_block(env: EnvFamily, k1: int, k2: int, which: str = "M"):
    """Spectral radii of the single matrices X_k, k in [k1, k2].

    Returns (rho, complex_pair) as ndarrays.  Vectorized; favoured over
    per-k :func:`spectral_radius` calls in hot loops.
    """
    if which == "M":
        a, b, d, th = env.params_block(k1, k2)
        tr = a + th
        det = a * th - b * d
    elif which == "A":
        atil, btil, dtil = transformed_block(env, k1, k2)
        tr = atil
        det = -btil * dtil
    else:
        raise ValueError(f"which must be 'M' or 'A', not {which!r}")
    disc = tr * tr - 4.0 * det
    cplx = disc < 0.0
    rho = np.where(cplx, np.sqrt(np.where(cplx, det, 1.0)),
                   (np.abs(tr) + np.sqrt(np.where(cplx, 0.0, disc))) / 2.0)
    return rho, cplx


# ---------------------------------------------------------------------
# scaled products and scans
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class ScaledMat:
    """A 2x2 product stored as mat * exp(log) with max |mat| == 1."""

    mat: np.ndarray
    log: float
    k_first: int
    k_last: int   # k_last < k_first encodes the empty (identity) product

    @property
    def is_empty(self) -> bool:
        return self.k_last < self.k_first

    def entry(self, i: int, j: int) -> LogScalar:
        """(i, j) entry, 1-indexed, as a LogScalar."""
        return LogScalar.of(self.mat[i - 1, j - 1]).scaled(self.log)

    def to_dense(self) -> np.ndarray:
        return self.mat * math.exp(self.log)


def _single(env: EnvFamily, k: int, which: str) -> np.ndarray:
    if which == "M":
        return mean_matrix(env, k)
    if which == "A":
        return transformed_matrix(env, k)
    raise ValueError(f"which must be 'M' or 'A', not {which!r}")


def _matrices_block(env: EnvFamily, k: int, n: int, which: str) -> np.ndarray:
    """Stack X_k..X_n as an (n-k+1, 2, 2) array."""
    if which == "M":
        a, b, d, th = env.params_block(k, n)
        out = np.empty((n - k + 1, 2, 2))
        out[:, 0, 0], out[:, 0, 1] = a, b
        out[:, 1, 0], out[:, 1, 1] = d, th
        return out
    if which == "A":
        atil, btil, dtil = transformed_block(env, k, n)
        out = np.empty((n - k + 1, 2, 2))
        out[:, 0, 0], out[:, 0, 1] = atil, btil
        out[:, 1, 0], out[:, 1, 1] = dtil, 0.0
        return out
    raise ValueError(f"which must be 'M' or 'A', not {which!r}")


def _renorm(mat: np.ndarray) -> tuple[np.ndarray, float]:
    s = float(np.max(np.abs(mat)))
    if s == 0.0 or not math.isfinite(s):
        raise ScalingError("matrix product lost its scale")
    return mat / s, math.log(s)


def scaled_product(env: EnvFamily, k: int, n: int, which: str = "M",
                   compensated: bool = False) -> ScaledMat:
    """X_k X_{k+1} ... X_n with per-step renormalization.

    ``compensated`` switches the log-scale accumulation to a compensated
    sum, for horizons long enough that plain accumulation of n log terms
    would eat into tight tolerances.
    """
    if n < k:
        return ScaledMat(np.eye(2), 0.0, k, n)
    mats = _matrices_block(env, k, n, which)
    prod = np.eye(2)
    logs: list[float] = []
    acc = 0.0
    for m in range(mats.shape[0]):
        prod = prod @ mats[m]
        prod, step = _renorm(prod)
        if compensated:
            logs.append(step)
        else:
            acc += step
    total = neumaier_sum(logs) if compensated else acc
    return ScaledMat(prod, total, k, n)


def product_scan(env: EnvFamily, k: int, n: int, which: str = "M") -> list[ScaledMat]:
    """All prefixes X_k..X_m for m = k..n, sharing one forward pass."""
    mats = _matrices_block(env, k, n, which)
    out: list[ScaledMat] = []
    prod = np.eye(2)
    acc = 0.0
    for m in range(mats.shape[0]):
        prod = prod @ mats[m]
        prod, step = _renorm(prod)
        acc += step
        out.append(ScaledMat(prod.copy(), acc, k, k + m))
    return out


def product_spectral_radius(p: ScaledMat) -> tuple[float, bool]:
    """log of the spectral radius of a scaled product, plus a complex flag."""
    sp = spectral_radius(p.mat)
    if sp.rho == 0.0:
        return float("-inf"), sp.complex_pair
    return math.log(sp.rho) + p.log, sp.complex_pair


def row_scan(env: EnvFamily, n: int, start, which: str = "M"):
    """Row states r_m = start * X_1 ... X_m, m = 0..n, log-scaled.

    Returns (rows, logs): rows is an (n+1, 2) array with max-abs 1 per
    row, logs the matching scales, so the true row is
    ``rows[m] * exp(logs[m])``.
    """
    rows = np.empty((n + 1, 2))
    logs = np.empty(n + 1)
    r = np.asarray(start, dtype=float)
    s = float(np.max(np.abs(r)))
    if s == 0.0:
        raise ScalingError("start row is zero")
    r = r / s
    lg = math.log(s)
    rows[0], logs[0] = r, lg
    if n >= 1:
        mats = _matrices_block(env, 1, n, which)
        for m in range(1, n + 1):
            r = r @ mats[m - 1]
            r, step = _renorm(r)
            lg += step
            rows[m], logs[m] = r, lg
    return rows, logs


def row_sum_scan(env: EnvFamily, n: int, inject=(1.0, 0.0), which: str = "M"):
    """States u_m = u_{m-1} X_m + inject with u_0 = inject, m = 0..n.

    In true scale ``u_m = sum_{k=1}^{m+1} inject * X_k ... X_m`` (the
    k = m+1 term is the empty product).  Log-scaled like
    :func:`row_scan`.
    """
    inj = np.asarray(inject, dtype=float)
    rows = np.empty((n + 1, 2))
    logs = np.empty(n + 1)
    u = inj.copy()
    u, lg = _renorm(u[None, :])
    u = u[0]
    rows[0], logs[0] = u, lg
    if n >= 1:
        mats = _matrices_block(env, 1, n, which)
        for m in range(1, n + 1):
            w = u @ mats[m - 1]
            sw = float(np.max(np.abs(w)))
            if not math.isfinite(sw):
                raise ScalingError("row sum scan lost its scale")
            # bring w (scale lg + log sw) and inject (scale 0) to a
            # common scale before adding; the smaller term may flush to
            # zero, which is harmless at double precision
            top = max(lg + (math.log(sw) if sw > 0.0 else float("-inf")), 0.0)
            combined = w * math.exp(lg - top) + inj * math.exp(-top)
            u, step = _renorm(combined[None, :])
            u = u[0]
            lg = top + step
            rows[m], logs[m] = u, lg
    return rows, logs


def column_scan(env: EnvFamily, k: int, n: int, terminal, which: str = "A"):
    """Column states y_j = X_j ... X_n terminal for j = n+1 down to k.

    Returns (vecs, logs) ordered by j ascending: ``vecs[j - k]`` is the
    normalized y_j and ``logs[j - k]`` its scale.  y_{n+1} = terminal.
    """
    if n < k - 1:
        raise ValueError("column scan needs n >= k - 1")
    cols = np.empty((n + 2 - k, 2))
    logs = np.empty(n + 2 - k)
    y = np.asarray(terminal, dtype=float)
    y, lg = _renorm(y[None, :])
    y = y[0]
    cols[n + 1 - k], logs[n + 1 - k] = y, lg
    if n >= k:
        mats = _matrices_block(env, k, n, which)
        for j in range(n, k - 1, -1):
            y = mats[j - k] @ y
            y, step = _renorm(y[None, :])
            y = y[0]
            lg += step
            cols[j - k], logs[j - k] = y, lg
    return cols, logs


# ---------------------------------------------------------------------
# sign structure of transformed products
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class SignReport:
    """Observed vs structural sign pattern of a transformed product."""

    k: int
    n: int
    top_row_positive: bool
    bottom_row_sign: int          # observed common sign, 0 when mixed/zero
    expected_bottom_sign: int     # sign(dtilde_k), exact for n >= k+1
    eventual_bottom_sign: int     # sign(b d - a theta) at the limit
    matches: bool
    product: ScaledMat


def entry_and_sign_report(env: EnvFamily, k: int, n: int) -> SignReport:
    """Check the structural sign pattern of A_k ... A_n.

    The top row is strictly positive for every n >= k.  The bottom row
    equals dtilde_k times the (positive) top row of A_{k+1} ... A_n, so
    both bottom entries share the sign of dtilde_k once n >= k + 1.
    A mismatch in floating point flags catastrophic cancellation.
    """
    p = scaled_product(env, k, n, which="A")
    _, _, dtil = transformed_block(env, k, k)
    expected = int(np.sign(dtil[0]))
    la, lb, ld, lth = env.limit_params()
    eventual = int(np.sign(lb * ld - la * lth))
    top_pos = bool(np.all(p.mat[0] > 0.0))
    signs = np.sign(p.mat[1])
    if n == k:
        observed = int(signs[0])  # bottom row of a single A_k is (dtilde_k, 0)
        ok = observed == expected
    elif signs[0] == signs[1]:
        observed = int(signs[0])
        ok = observed == expected
    else:
        observed = 0
        ok = expected == 0
    return SignReport(k, n, top_pos, observed, expected, eventual,
                      bool(ok and top_pos), p)

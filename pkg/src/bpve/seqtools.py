"""Small helpers for sequences that converge to a limit.

Every asymptotic statement in this package reduces, numerically, to a
finite sequence that should settle down.  The helpers here centralise
the two judgement calls involved: when a sequence counts as stabilized,
and how to squeeze a better limit estimate out of geometrically
converging iterates (Aitken's delta-squared step).
"""

from __future__ import annotations

import math

import numpy as np

#: Relative variation over the last doubling window below which a
#: sequence is considered stabilized.
STABLE_REL_TOL = 1e-3


def aitken(values) -> float:
    """One Aitken delta-squared step applied to the tail of ``values``.

    Falls back to the last value when the second difference is too small
    for the step to be meaningful (already converged, or not
    geometric).
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return float(v[-1])
    x0, x1, x2 = v[-3], v[-2], v[-1]
    denom = (x2 - x1) - (x1 - x0)
    if not math.isfinite(denom) or abs(denom) <= 1e-15 * (abs(x2) + abs(x1) + abs(x0) + 1e-300):
        return float(x2)
    acc = x2 - (x2 - x1) ** 2 / denom
    if not math.isfinite(acc):
        return float(x2)
    return float(acc)


def limit_estimate(values, rel_tol: float = STABLE_REL_TOL) -> tuple[float, bool]:
    """Estimate the limit of a convergent-looking sequence.

    Returns ``(estimate, stabilized)``.  The sequence is stabilized when
    every value in the last doubling window (indices ``n//2 .. n``) is
    within ``rel_tol`` of the final value, relatively; an absolute floor
    of ``rel_tol**2`` guards limits at zero.  The estimate is the Aitken
    acceleration of the last three values.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, False
    last = float(v[-1])
    if not math.isfinite(last):
        return last, False
    window = v[v.size // 2 :]
    scale = max(abs(last), rel_tol)
    stable = bool(np.all(np.isfinite(window)) and np.max(np.abs(window - last)) <= rel_tol * scale)
    return aitken(v), stable


def ratio_sequence(values, floor: float = 1e-280):
    """Successive ratios ``v[k+1]/v[k]``, skipping entries below ``floor``.

    Used for difference-quotient limits; returns a (possibly empty)
    float array.
    """
    v = np.asarray(values, dtype=float)
    out = []
    for x, y in zip(v[:-1], v[1:]):
        if abs(x) > floor and math.isfinite(x) and math.isfinite(y):
            out.append(y / x)
    return np.asarray(out, dtype=float)


def neumaier_sum(values) -> float:
    """Compensated sum; cheap insurance for long accumulations."""
    s = 0.0
    c = 0.0
    for x in values:
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c

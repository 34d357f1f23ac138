"""
Limit statements, measured
==========================

The asymptotic layer turns each limit statement about long matrix
products into a finite diagnostic: a sequence, an accelerated estimate
of its limit, a doubling-window stability verdict, and (where a claim
asserts one) a bound check.  This script runs them one at a time, then
lets the suite run everything at once.
"""

import numpy as np

from bpve import asymcheck
from bpve.env import fixture

env = fixture("E_tri_up")

# Product entries scaled by the running product of spectral radii
# settle to a nonzero constant.
d = asymcheck.entry_to_radius_limit(env, 1, 1, 1, nmax=300)
print(f"{d.name}: estimate {d.limit_estimate:.9f} "
      f"stabilized={d.stabilized} violated={d.violated}")

# Partial sums of product entries against partial sums of radius
# products; for the unperturbed constant family the limit is 5/6.
for name in ("E_star", "E_tri_up"):
    s = asymcheck.partial_sum_ratio(fixture(name), nmax=600)
    print(f"partial_sum_ratio on {name}: {s.limit_estimate:.9f}")

# The spectral radius of a product sits inside an eigenvector sandwich
# at every horizon; the check counts escapes (there are none).
rb = asymcheck.radius_product_bounds(env, 1, 200)
print(f"\n{rb.name}: {rb.notes}, final ratio {rb.values[-1]:.9f} in "
      f"[{rb.bound_check.lower:.9f}, {rb.bound_check.upper:.9f}]")

# Two radius-ratio limits come with analytic targets; compare.
d1, d2 = asymcheck.radius_ratio_limits(env, 1, nmax=400)
t1, t2 = asymcheck.radius_ratio_targets(env, 1)
print(f"radius-to-entry limit {d1.limit_estimate:.9f} vs target {t1:.9f}")
print(f"radius-to-radius limit {d2.limit_estimate:.9f} vs target {t2:.9f}")

# When the transformed corner entries are negative the approximants
# increase monotonically toward their tails, and consecutive gaps
# contract at a computable rate.
neg = fixture("E_minus")
mono = asymcheck.approximant_monotonicity_report(neg, kmax=100, nmax=120)
print(f"\nmonotone regime on E_minus: {mono.increment_violations} increment "
      f"violations, {mono.tail_bound_violations} tail violations")
print(f"gap-ratio sup {mono.ratio_sup:.9f} vs limit {mono.ratio_limit:.9f}")

# The suite runs every applicable diagnostic and tallies failures; the
# command line maps a nonzero tally to its verification exit code.
rep = asymcheck.run_suite(env, nmax=600, threads=4)
print(f"\nsuite on {rep.env_name}: {rep.verification_failures} failures, "
      f"cross-link residual {rep.cross_link_residual:.2e}")
for diag in rep.all_diagnostics():
    print(f"  {diag.name:32s} estimate {diag.limit_estimate: .6f} "
          f"stabilized={diag.stabilized}")

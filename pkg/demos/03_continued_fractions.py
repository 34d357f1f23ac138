"""
Continued fractions behind the matrix products
==============================================

Ratios of product entries satisfy three-term recurrences, which makes
them approximants of continued fractions.  Three coefficient families
show up: one from stepping the product start index, one from the first
row of backward products, and one descending family from the columns of
forward products.  This script evaluates all three and exercises the
identities that tie them back to the matrices.
"""

import numpy as np

from bpve import cfrac
from bpve.env import fixture

env = fixture("E_star")

# Coefficients are constant for a constant family, so the fixed point
# of t = beta / (alpha + t) is the exact infinite tail.
for prov in ("step_ratio", "row_ratio", "column_ratio"):
    coeffs = cfrac.coeffs_for(env, prov)
    alpha, beta = coeffs.at(1)
    print(f"{prov:13s} alpha_1={alpha:.6f} beta_1={beta:.6f} "
          f"tail_limit={cfrac.tail_limit(coeffs):.6f}")

# Approximants xi_{k,n} converge to the tail xi_k as n grows.
coeffs = cfrac.coeffs_for(env, "step_ratio")
tail = cfrac.tails_block(coeffs, 1, env=env)[0]
print("\nstep family at k=1: tail =", tail)
for n in (1, 2, 4, 8, 16, 32):
    x = cfrac.approximant(coeffs, 1, n)
    print(f"  xi_(1,{n:2d}) = {x:.12f}   gap {tail - x:.3e}")

# The Euler-Minding form turns the same fraction into a telescoping
# series; its partial sums are exactly the approximants.
em = cfrac.euler_minding(coeffs, 1, 12)
rebuilt = em.xi[0] + np.cumsum(em.increments())
print("\ntelescoping residual to n=12:",
      float(np.max(np.abs(rebuilt - em.xi[1:]))))

# Every approximant is also a ratio of entries of an explicit matrix
# product; the bridge evaluates that product independently.
worst = 0.0
for k, n in ((1, 10), (3, 30), (7, 50)):
    direct = cfrac.approximant(coeffs, k, n)
    via_matrix = cfrac.matrix_bridge(env, "step_ratio", k, n)
    worst = max(worst, abs(direct - via_matrix))
print("matrix bridge residual over sampled (k, n):", worst)

# On a perturbed family the coefficients drift with k, and the package
# tracks how the fluctuation sequences decay.
pert = fixture("E_tri_up")
fl = cfrac.fluctuations(pert, K=200)
print("\nperturbed family decay estimates:")
print("  tail fluctuation rate  ", fl.q_hat_eps_xi)
print("  entry-ratio fluctuation", fl.q_hat_eps_f)
print("  drift of tails         ", fl.q_hat_delta_xi)

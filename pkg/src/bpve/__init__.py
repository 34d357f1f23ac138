"""Numerical laboratory for the extinction time of a 2-type
linear-fractional branching process in a varying environment.

The package splits into narrow layers:

* :mod:`bpve.env` declares parameter sequences and checks the standing
  positivity and convergence assumptions.
* :mod:`bpve.matprod` evaluates long mean-matrix products in a scaled
  form that never overflows.
* :mod:`bpve.cfrac` handles the continued fractions built from the
  transformed parameters: approximants, tails, bridge identities.
* :mod:`bpve.extinct` computes the survival curve and the mass function
  of the extinction time, exactly and through the product form, with
  the associated limit constants.
* :mod:`bpve.asymcheck` verifies each asymptotic statement numerically
  and reports violations.
* :mod:`bpve.mcsim` draws offspring trees by inverse sampling of the
  linear-fractional laws for distributional spot checks.
* :mod:`bpve.cli` is the config-driven command line front end.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .env import (
    EnvError,
    EnvFamily,
    EnvLimits,
    FIXTURES,
    SequenceUndefinedError,
    classify_ratio_drift,
    degeneracy_flag,
    dtilde_sign_profile,
    fixture,
    limits,
    variation_partial_sum,
    variation_total_bound,
)
from .extinct import (
    estimate_constants,
    extinction_curve,
    extinction_pmf,
    g_sequences,
    pmf_product_form,
    survival_backward,
    survival_matrix,
)
from .mcsim import offspring_law, validate_pgf
from .mcsim import run as simulate

__all__ = [
    "EnvError",
    "EnvFamily",
    "EnvLimits",
    "FIXTURES",
    "SequenceUndefinedError",
    "classify_ratio_drift",
    "degeneracy_flag",
    "dtilde_sign_profile",
    "estimate_constants",
    "extinction_curve",
    "extinction_pmf",
    "fixture",
    "g_sequences",
    "limits",
    "offspring_law",
    "pmf_product_form",
    "simulate",
    "survival_backward",
    "survival_matrix",
    "validate_pgf",
    "variation_partial_sum",
    "variation_total_bound",
    "__version__",
]

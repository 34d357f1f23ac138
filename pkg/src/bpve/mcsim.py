"""Monte Carlo oracle for the two-type linear-fractional process.

The exact machinery elsewhere in this package computes survival
probabilities and extinction-time masses through matrix products and
continued fractions.  This module checks those numbers against brute
force: simulate the population forward, count survivors.

The offspring law of a type-i parent in generation k has generating
function 1 - m_i u / (1 + g u) with u = 1 - s, m_i the i-th row of the
mean matrix and g its first row.  Expanding the series shows the law
is: zero children with probability q0 = 1 - |m_i|/(1+|g|); otherwise a
total of N children, N - 1 geometric on top of one guaranteed child,
with the joint type split

    P(N=n, J=j) = w(n,j) / (1+|g|)^{n+1},
    w(n,j) = (1+|g|) [ m_{i1} C(n-1,j-1) g1^{j-1} g2^{n-j}
                     + m_{i2} C(n-1,j)   g1^{j}   g2^{n-j-1} ]
             - |m_i| C(n,j) g1^j g2^{n-j},

where J counts the type-1 children.  Rather than tabulating w, the
sampler uses an equivalent two-stage draw that follows from Pascal's
rule applied to the display above: one tilted first child of type 1
with probability lambda_1/|m_i| where lambda_j = (1+|g|) m_{ij} -
|m_i| g_j, then N - 1 further children i.i.d. type 1 with probability
g1/|g|.  Summing the resulting binomial masses reproduces w(n,j)
exactly, so no truncated table and no log-domain binomials are needed.
The representation is valid precisely when both lambda weights are
nonnegative, which is also the all-n certificate used by
:func:`validate_pgf`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np
from scipy.stats import norm

from .env import EnvFamily

#: Two-sided 95% normal quantile for the survival confidence intervals.
_Z95 = float(norm.ppf(0.975))

#: Per-replicate population cap; a replicate that reaches it is frozen
#: as permanently surviving (it cannot plausibly die out afterwards,
#: and supercritical runs must terminate).
EXPLOSION_LIMIT = 1_000_000

#: Replicates per work unit.  Chunk boundaries depend only on the
#: replicate count, so results are identical for any thread count.
CHUNK_SIZE = 1 << 17

#: Negative masses within this tolerance are treated as rounding and
#: clamped to zero; anything lower means the parameters do not define
#: a probability law.
NEG_TOL = 1e-12


class InvalidLawError(ValueError):
    """The requested parameters do not define an offspring law."""


class ExplosionGuardError(RuntimeError):
    """A single draw exceeded the population cap."""


# ---------------------------------------------------------------------
# offspring law
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class OffspringLaw:
    """Sampling parameters for one parent type in one generation.

    ``q0`` is the no-offspring probability, ``p`` the geometric
    continuation parameter, ``lam1``/``lam2`` the first-child tilt
    weights (summing to ``|m_i|``), ``g1``/``g2`` the shared
    denominator row, and ``mean1``/``mean2`` the exact offspring means
    (row i of the mean matrix), kept for moment checks.
    """

    type_index: int
    generation: int
    q0: float
    p: float
    lam1: float
    lam2: float
    g1: float
    g2: float
    mean1: float
    mean2: float


def offspring_law(env: EnvFamily, k: int, type_index: int) -> OffspringLaw:
    """Build the sampleable law for a type-``type_index`` parent at k.

    Raises :class:`InvalidLawError` when the parameters fail to define
    a probability law that the two-stage scheme can realize: a tilt
    weight or the zero-offspring mass materially negative.
    """
    if type_index not in (1, 2):
        raise InvalidLawError("type_index must be 1 or 2")
    a, b, d, th = env.params_at(k)
    g1, g2 = a, b
    gsum = g1 + g2
    m1, m2 = (a, b) if type_index == 1 else (d, th)
    msum = m1 + m2
    q0 = 1.0 - msum / (1.0 + gsum)
    p = gsum / (1.0 + gsum)
    lam1 = (1.0 + gsum) * m1 - msum * g1
    lam2 = (1.0 + gsum) * m2 - msum * g2
    if lam1 < -NEG_TOL or lam2 < -NEG_TOL:
        raise InvalidLawError(
            f"invalid linear-fractional parameters for type {type_index} "
            f"at generation {k}: negative composition weight")
    if q0 < -NEG_TOL:
        raise InvalidLawError(
            f"invalid linear-fractional parameters for type {type_index} "
            f"at generation {k}: zero-offspring mass {q0:.6g} is negative")
    return OffspringLaw(type_index, k, max(q0, 0.0), p,
                        max(lam1, 0.0), max(lam2, 0.0), g1, g2, m1, m2)


# ---------------------------------------------------------------------
# pgf validation
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class TypeValidation:
    """Per-type outcome of the coefficient expansion."""

    type_index: int
    q0: float                 # reported, not gated: formal parameter
    lam: tuple[float, float]  # sets may carry q0 < 0 yet a clean table
    min_weight: float
    identity_rel_err: float
    certificate_ok: bool      # lambda >= 0: all-n nonnegativity proof


@dataclass(frozen=True)
class PgfValidation:
    env_name: str
    generation: int
    n_check: int
    per_type: tuple[TypeValidation, TypeValidation]

    @property
    def passed(self) -> bool:
        return all(t.min_weight >= -NEG_TOL and t.identity_rel_err <= 1e-10
                   for t in self.per_type)


def validate_pgf(env: EnvFamily, k: int = 1, n_check: int = 50) -> PgfValidation:
    """Expand the pgf coefficients and verify they form a (signed-free) table.

    For each parent type the joint weights w(n, j) are computed for all
    n <= n_check and checked against two facts: every weight must be
    nonnegative (within rounding), and each row must sum to
    |m_i| |g|^{n-1} exactly (a binomial identity, so any excess is an
    implementation bug, not a modelling one).  The endpoint certificate
    (1+|g|) m_{ij} >= |m_i| g_j (equivalently lambda_j >= 0) is
    reported as a sufficient condition covering all n at once.

    The zero-offspring mass q0 is reported but not gated: parameter
    sets used as formal objects can carry q0 < 0 while the n >= 1
    table stays clean.  A materially negative weight raises
    :class:`InvalidLawError`.
    """
    if n_check < 1:
        raise ValueError("need n_check >= 1")
    a, b, d, th = env.params_at(k)
    g1, g2 = a, b
    gsum = g1 + g2
    reports = []
    for type_index, (m1, m2) in ((1, (a, b)), (2, (d, th))):
        msum = m1 + m2
        lam1 = (1.0 + gsum) * m1 - msum * g1
        lam2 = (1.0 + gsum) * m2 - msum * g2
        min_w = math.inf
        worst_rel = 0.0
        for n in range(1, n_check + 1):
            total = 0.0
            for j in range(n + 1):
                w = (1.0 + gsum) * (
                    (m1 * math.comb(n - 1, j - 1) * g1 ** (j - 1) * g2 ** (n - j)
                     if j >= 1 else 0.0)
                    + (m2 * math.comb(n - 1, j) * g1 ** j * g2 ** (n - j - 1)
                       if j <= n - 1 else 0.0)
                ) - msum * math.comb(n, j) * g1 ** j * g2 ** (n - j)
                min_w = min(min_w, w)
                total += w
            expect = msum * gsum ** (n - 1)
            worst_rel = max(worst_rel, abs(total - expect) / expect)
        if min_w < -NEG_TOL:
            raise InvalidLawError(
                f"invalid linear-fractional parameters for type {type_index} "
                f"at generation {k}: weight {min_w:.6g} at horizon <= {n_check}")
        reports.append(TypeValidation(
            type_index, 1.0 - msum / (1.0 + gsum), (lam1, lam2),
            min_w, worst_rel, certificate_ok=(lam1 >= 0.0 and lam2 >= 0.0)))
    return PgfValidation(env.name, k, n_check, tuple(reports))


# ---------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------

def sample_offspring_batch(law: OffspringLaw, size: int,
                           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized draws: (j1, j2) child counts for ``size`` parents.

    Consumes the stream in a fixed order (survival uniforms, geometric
    totals, tilt uniforms, binomial splits) so replay with an equal
    generator state reproduces the draw.
    """
    n = np.zeros(size, dtype=np.int64)
    j1 = np.zeros(size, dtype=np.int64)
    alive = rng.random(size) >= law.q0
    count = int(np.count_nonzero(alive))
    if count:
        n[alive] = rng.geometric(1.0 - law.p, count) if law.p > 0.0 else 1
        lam_sum = law.lam1 + law.lam2
        first = rng.random(count) < law.lam1 / lam_sum
        frac = law.g1 / (law.g1 + law.g2)
        j1[alive] = first + rng.binomial(n[alive] - 1, frac)
    return j1, n - j1


def sample_offspring(law: OffspringLaw, rng: np.random.Generator) -> tuple[int, int]:
    """One draw of (type-1 children, type-2 children)."""
    j1, j2 = sample_offspring_batch(law, 1, rng)
    total = int(j1[0]) + int(j2[0])
    if total > EXPLOSION_LIMIT:
        raise ExplosionGuardError(f"explosion guard: single draw of {total}")
    return int(j1[0]), int(j2[0])


# ---------------------------------------------------------------------
# forward simulation
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class SimResult:
    """Survival counts and first-generation moment summaries.

    ``survivors[t]`` counts replicates with a nonempty population at
    ``horizons[t]`` (replicates frozen by the explosion guard count as
    survivors from then on).  The confidence intervals are the usual
    normal approximation at 95%.  ``offspring_mean`` is the empirical
    mean first-generation offspring vector, with its standard errors,
    for moment checks against the first mean matrix row.
    """

    env_name: str
    start_type: int
    horizons: tuple[int, ...]
    replicates: int
    master_seed: int
    threads: int
    survivors: np.ndarray
    exploded: int
    offspring_mean: tuple[float, float]
    offspring_stderr: tuple[float, float]

    @property
    def survival_hat(self) -> np.ndarray:
        return self.survivors / self.replicates

    @property
    def stderr(self) -> np.ndarray:
        p = self.survival_hat
        return np.sqrt(p * (1.0 - p) / self.replicates)

    def ci95(self) -> tuple[np.ndarray, np.ndarray]:
        p, s = self.survival_hat, self.stderr
        return p - _Z95 * s, p + _Z95 * s

    def rows(self) -> list[dict]:
        """One record per horizon, ready for CSV emission."""
        lo, hi = self.ci95()
        return [
            {
                "horizon": int(h),
                "start_type": self.start_type,
                "survivors": int(self.survivors[t]),
                "replicates": self.replicates,
                "p_hat": float(self.survival_hat[t]),
                "ci_low": float(lo[t]),
                "ci_high": float(hi[t]),
                "seed": self.master_seed,
            }
            for t, h in enumerate(self.horizons)
        ]


def _simulate_chunk(env: EnvFamily, start_type: int, horizons: tuple[int, ...],
                    count: int, seed: np.random.SeedSequence):
    """Simulate ``count`` replicates; returns integer tallies only."""
    rng = np.random.default_rng(seed)
    z1 = np.full(count, 1 if start_type == 1 else 0, dtype=np.int64)
    z2 = np.full(count, 1 if start_type == 2 else 0, dtype=np.int64)
    frozen = np.zeros(count, dtype=bool)
    horizon_set = set(horizons)
    survivors = np.zeros(len(horizons), dtype=np.int64)
    hpos = {h: t for t, h in enumerate(horizons)}
    if 0 in horizon_set:
        survivors[hpos[0]] = count
    j1_sum = j2_sum = j1_sq = j2_sq = 0
    for gen in range(1, (max(horizons) if horizons else 0) + 1):
        active = ((z1 > 0) | (z2 > 0)) & ~frozen
        new1 = np.zeros(count, dtype=np.int64)
        new2 = np.zeros(count, dtype=np.int64)
        if np.any(active):
            owners = np.nonzero(active)[0]
            for law, z in ((offspring_law(env, gen, 1), z1),
                           (offspring_law(env, gen, 2), z2)):
                parents = np.repeat(owners, z[owners])
                if parents.size:
                    j1, j2 = sample_offspring_batch(law, parents.size, rng)
                    new1 += np.bincount(parents, weights=j1,
                                        minlength=count).astype(np.int64)
                    new2 += np.bincount(parents, weights=j2,
                                        minlength=count).astype(np.int64)
        z1, z2 = new1, new2
        if gen == 1:
            j1_sum = int(z1.sum()); j2_sum = int(z2.sum())
            j1_sq = int((z1 * z1).sum()); j2_sq = int((z2 * z2).sum())
        pop = z1 + z2
        blown = pop >= EXPLOSION_LIMIT
        if np.any(blown):
            frozen |= blown
            z1[blown] = 0
            z2[blown] = 0
        if gen in horizon_set:
            survivors[hpos[gen]] = int(np.count_nonzero((pop > 0) | frozen))
    return survivors, int(np.count_nonzero(frozen)), j1_sum, j2_sum, j1_sq, j2_sq


def run(env: EnvFamily, start_type: int, horizons, replicates: int,
        master_seed: int, threads: int = 4) -> SimResult:
    """Simulate the process and tally survival at each horizon.

    Replicates are split into fixed-size chunks, each driven by its own
    generator spawned as ``SeedSequence(master_seed, spawn_key=(chunk,))``;
    chunk tallies are integers summed in chunk order, so the result is
    identical for any ``threads`` value and any execution schedule.
    """
    if start_type not in (1, 2):
        raise ValueError("start_type must be 1 or 2")
    if replicates < 1:
        raise ValueError("need replicates >= 1")
    horizons = tuple(int(h) for h in horizons)
    if any(h < 0 for h in horizons) or list(horizons) != sorted(set(horizons)):
        raise ValueError("horizons must be distinct, nonnegative, increasing")
    # fail fast if any generation's law is unsampleable
    top = max(horizons) if horizons else 0
    for gen in range(1, top + 1):
        offspring_law(env, gen, 1)
        offspring_law(env, gen, 2)

    sizes = [CHUNK_SIZE] * (replicates // CHUNK_SIZE)
    if replicates % CHUNK_SIZE:
        sizes.append(replicates % CHUNK_SIZE)
    jobs = [(idx, size, np.random.SeedSequence(master_seed, spawn_key=(idx,)))
            for idx, size in enumerate(sizes)]

    def work(job):
        idx, size, seed = job
        return _simulate_chunk(env, start_type, horizons, size, seed)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]

    survivors = np.zeros(len(horizons), dtype=np.int64)
    exploded = 0
    j1_sum = j2_sum = j1_sq = j2_sq = 0
    for s, e, a, b, aa, bb in parts:
        survivors += s
        exploded += e
        j1_sum += a; j2_sum += b
        j1_sq += aa; j2_sq += bb

    r = float(replicates)
    mean1, mean2 = j1_sum / r, j2_sum / r
    var1 = max(j1_sq / r - mean1 * mean1, 0.0)
    var2 = max(j2_sq / r - mean2 * mean2, 0.0)
    return SimResult(env.name, start_type, horizons, replicates,
                     int(master_seed), threads, survivors, exploded,
                     (mean1, mean2),
                     (math.sqrt(var1 / r), math.sqrt(var2 / r)))

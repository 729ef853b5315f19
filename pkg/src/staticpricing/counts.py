"""Distributions of the demand count X (buyers at or above the price).

Three constructions share one representation: `pmf[i]` is the exact
probability of count i for i < len(pmf), and `tail_mass` is Pr[X >= len(pmf)].
The sellout statistics delta_k = Pr[X <= k-1] and mu_k = E[min(X, k)] / k are
evaluated on that representation. Closed-form Poisson and binomial routes for
the same two statistics live here too; they are cross-checked against the pmf
route in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln
from scipy.stats import binom as _binom

__all__ = [
    "CountDistribution",
    "BiasProfile",
    "NumericalDegradationError",
    "poisson_binomial",
    "poisson_binomial_truncated",
    "truncated_poisson",
    "delta_k",
    "mu_k",
    "poisson_delta_mu",
    "binomial_delta_mu",
]

POISSON_TAIL_CUTOFF = 1e-14
_TOTAL_TOL = 1e-12


class NumericalDegradationError(RuntimeError):
    """Raised when a computed PMF fails its mass-balance check."""


@dataclass(frozen=True)
class BiasProfile:
    """Per-buyer purchase probabilities b_t in [0, 1]."""

    biases: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.biases, dtype=float)
        if b.ndim != 1:
            raise ValueError("biases must be a 1-d vector")
        if np.any(b < 0.0) or np.any(b > 1.0):
            raise ValueError("biases must lie in [0, 1]")
        object.__setattr__(self, "biases", b)

    def __len__(self):
        return len(self.biases)


@dataclass(frozen=True)
class CountDistribution:
    """Count distribution with exact bins 0..len(pmf)-1 and aggregated tail.

    kind is one of 'poisson_binomial', 'poisson_binomial_truncated',
    'truncated_poisson'. rate is set for the Poisson variant only.
    """

    pmf: np.ndarray
    tail_mass: float
    kind: str
    rate: float | None = None

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        object.__setattr__(self, "pmf", pmf)
        if np.any(pmf < 0.0):
            raise NumericalDegradationError("pmf has negative entries after clamping")
        total = float(np.sum(pmf)) + self.tail_mass
        if abs(total - 1.0) > _TOTAL_TOL:
            raise NumericalDegradationError(
                f"pmf mass {total!r} deviates from 1 beyond 1e-12"
            )

    def support_len(self) -> int:
        return len(self.pmf)


def _as_bias_array(profile) -> np.ndarray:
    if isinstance(profile, BiasProfile):
        return profile.biases
    b = np.asarray(profile, dtype=float)
    if b.ndim != 1 or np.any(b < 0.0) or np.any(b > 1.0):
        raise ValueError("bias profile must be a 1-d vector with entries in [0, 1]")
    return b


def poisson_binomial(profile) -> CountDistribution:
    """Exact PMF of a sum of independent Bernoullis, O(n^2) convolution."""
    b = _as_bias_array(profile)
    n = len(b)
    pmf = np.zeros(n + 1)
    pmf[0] = 1.0
    for i, bi in enumerate(b):
        # counts above i+1 are still zero; only touch the live prefix
        pmf[1 : i + 2] = pmf[1 : i + 2] * (1.0 - bi) + pmf[0 : i + 1] * bi
        pmf[0] *= 1.0 - bi
    pmf = np.maximum(pmf, 0.0)
    return CountDistribution(pmf=pmf, tail_mass=0.0, kind="poisson_binomial")


def _truncated_state(b: np.ndarray, k: int) -> np.ndarray:
    """Probabilities of the states {0, .., k, >= k+1} for a Bernoulli sum.

    Buyers are folded in sorted order (small profiles) or grouped by distinct
    bias (large profiles), so the result is bit-identical under permutations
    of the profile.
    """
    cap = k + 1
    if len(b) <= 64:
        state = [0.0] * (cap + 1)
        state[0] = 1.0
        for bi in sorted(b.tolist()):
            state[cap] += state[cap - 1] * bi
            for j in range(cap - 1, 0, -1):
                state[j] = state[j] * (1.0 - bi) + state[j - 1] * bi
            state[0] *= 1.0 - bi
        return np.maximum(np.array(state), 0.0)
    state = np.zeros(cap + 1)
    state[0] = 1.0
    uniq, counts = np.unique(b, return_counts=True)
    for bi, m in zip(uniq, counts):
        block = _binomial_block(float(bi), int(m), cap)
        new = np.zeros(cap + 1)
        # plain truncated convolution; the top cell absorbs everything past cap
        for j, w in enumerate(block):
            if w == 0.0:
                continue
            shifted = state[: cap + 1 - j]
            new[j : j + len(shifted)] += w * shifted
            if j > 0:
                new[cap] += w * np.sum(state[cap + 1 - j :])
        state = new
    return np.maximum(state, 0.0)


def poisson_binomial_truncated(profile, k: int) -> CountDistribution:
    """Bernoulli-sum distribution tracking exact bins 0..k and the mass at >= k+1.

    O(n * k) worst case; buyers with equal bias are folded in as one binomial
    block, so i.i.d.-heavy profiles cost O(k^2) per distinct bias.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    state = _truncated_state(_as_bias_array(profile), k)
    return CountDistribution(
        pmf=state[: k + 1], tail_mass=float(state[k + 1]), kind="poisson_binomial_truncated"
    )


def profile_delta_mu(profile, k: int) -> tuple[float, float]:
    """(delta_k, mu_k) of a Bernoulli-sum count, without building the
    distribution object; the hot path for price and profile solvers."""
    if k < 1:
        raise ValueError("k must be at least 1")
    state = _truncated_state(_as_bias_array(profile), k)
    delta = float(np.sum(state[:k]))
    weights = np.minimum(np.arange(k + 2), k)
    mu = float(np.dot(weights, state)) / k
    return delta, mu


def _binomial_block(p: float, m: int, cap: int) -> np.ndarray:
    """PMF of Binomial(m, p) over 0..min(m, cap), last cell holding Pr[>= cap]."""
    top = min(m, cap)
    out = np.zeros(top + 1)
    if p == 0.0:
        out[0] = 1.0
        return out
    if p == 1.0:
        out[top] = 1.0
        return out
    i = np.arange(top + 1)
    out = _binom.pmf(i, m, p)
    if m > cap:
        out[top] = _binom.sf(cap - 1, m, p)
    return out


def truncated_poisson(rate: float) -> CountDistribution:
    """Poisson(rate) PMF cut at the smallest N with Pr[X > N] <= 1e-14.

    Anchored at the mode in log space, extended by the multiplicative
    recurrence in both directions, then renormalized; stable for rates
    up to 1e4 and beyond.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if rate == 0.0:
        return CountDistribution(pmf=np.array([1.0]), tail_mass=0.0, kind="truncated_poisson", rate=0.0)

    mode = int(rate)
    log_anchor = -rate + mode * math.log(rate) - float(gammaln(mode + 1))
    anchor = math.exp(log_anchor)

    # Upper reach: beyond rate + 10*sqrt(rate) + 40 the mass is far below cutoff;
    # extend further only to pin the tail numerically.
    hi = int(math.ceil(rate + 12.0 * math.sqrt(rate) + 50.0))
    while True:
        up = np.arange(mode + 1, hi + 1, dtype=float)
        upper = anchor * np.cumprod(rate / up) if len(up) else np.empty(0)
        # stop once the last term is negligible and decaying geometrically
        if len(upper) == 0 or (upper[-1] < 1e-22 and rate / (hi + 1) < 0.9):
            break
        hi = int(hi * 1.25) + 20

    # Below mode - 42*sqrt(rate) the PMF sits past the double underflow
    # threshold, so the recurrence would produce exact zeros anyway.
    lo_cut = max(0, mode - int(math.ceil(42.0 * math.sqrt(rate) + 80.0)))
    down = np.arange(mode, lo_cut, -1, dtype=float)
    lower = anchor * np.cumprod(down / rate) if len(down) else np.empty(0)
    raw = np.concatenate([np.zeros(lo_cut), lower[::-1], [anchor], upper])

    total = float(np.sum(raw))
    # rev_tail[i] = unnormalized Pr[X > i]
    rev_tail = np.cumsum(raw[::-1])[::-1] - raw
    tail_frac = rev_tail / total
    meets = np.nonzero(tail_frac <= POISSON_TAIL_CUTOFF)[0]
    n_max = int(meets[0]) if len(meets) else len(raw) - 1

    pmf = raw[: n_max + 1] / total
    tail_mass = float(tail_frac[n_max])
    return CountDistribution(pmf=pmf, tail_mass=tail_mass, kind="truncated_poisson", rate=float(rate))


def delta_k(x: CountDistribution, k: int) -> float:
    """Pr[X <= k-1]: the chance the supply does not sell out."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > x.support_len() and x.tail_mass > 1e-10:
        raise ValueError("count distribution has aggregated mass below k; rebuild with a larger cap")
    return float(np.sum(x.pmf[:k]))


def mu_k(x: CountDistribution, k: int) -> float:
    """E[min(X, k)] / k: the expected fraction of units sold."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > x.support_len() and x.tail_mass > 1e-10:
        raise ValueError("count distribution has aggregated mass below k; rebuild with a larger cap")
    idx = np.minimum(np.arange(x.support_len()), k)
    expected = float(np.dot(idx, x.pmf)) + k * x.tail_mass
    return expected / k


# ---------------------------------------------------------------------------
# Closed-form routes for the same two statistics
# ---------------------------------------------------------------------------


def poisson_delta_mu(rate: float, k: int) -> tuple[float, float]:
    """(delta_k, mu_k) of Poisson(rate) via regularized incomplete gamma.

    Uses Pr[Poisson(rate) <= j-1] = Q(j, rate) and the partial-mean identity
    sum_{i<k} i*p_i = rate * Pr[X <= k-2], so both statistics cost O(1).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if rate == 0.0:
        return 1.0, 0.0
    q_k = float(gammaincc(k, rate))
    q_km1 = float(gammaincc(k - 1, rate)) if k > 1 else 0.0
    delta = q_k
    mu = (rate / k) * q_km1 + 1.0 - q_k
    return delta, mu


def binomial_delta_mu(n: int, p: float, k: int) -> tuple[float, float]:
    """(delta_k, mu_k) of Binomial(n, p) via the cdf identity
    sum_{i<k} i*pmf(i; n, p) = n*p*Pr[Binomial(n-1, p) <= k-2]."""
    if k < 1:
        raise ValueError("k must be at least 1")
    delta = float(_binom.cdf(k - 1, n, p))
    partial = n * p * float(_binom.cdf(k - 2, n - 1, p)) if k > 1 else 0.0
    mu = (partial + k * (1.0 - delta)) / k
    return delta, mu

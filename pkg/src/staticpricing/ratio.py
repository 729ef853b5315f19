"""Worst-case guarantee of the equalizing price as a function of supply.

The infimum over instances is attained by a Poisson demand count whose rate
makes delta_k and mu_k agree; solving that scalar fixed point per k gives the
guarantee curve. The adaptive-policy baseline 1 - sqrt(1/(k+3)) is included
for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .counts import delta_k, mu_k, poisson_delta_mu, truncated_poisson

__all__ = [
    "RatioPoint",
    "solve_poisson_rate",
    "alaei_ratio",
    "ratio_table",
    "baseline_crossover",
]

RATE_RESIDUAL_TOL = 1e-13


@dataclass(frozen=True)
class RatioPoint:
    k: int
    rate: float
    phi: float
    alaei: float
    asymptotic_gap: float

    def csv_row(self) -> str:
        return f"{self.k},{self.rate!r},{self.phi!r},{self.alaei!r}"


def _pmf_residual(rate: float, k: int) -> tuple[float, float, float]:
    x = truncated_poisson(rate)
    d, m = delta_k(x, k), mu_k(x, k)
    return d - m, d, m


def solve_poisson_rate(k: int) -> RatioPoint:
    """Rate at which Poisson demand equalizes delta_k and mu_k.

    h(rate) = delta - mu falls strictly from 1 to -1, so bisection cannot
    fail. A first pass on the closed-form statistics narrows the bracket
    cheaply; a second pass on the explicit PMF polishes the root so that the
    residual measured on the PMF route itself is at machine level.
    """
    if k < 1:
        raise ValueError("k must be at least 1")

    lo, hi = 0.0, k + 10.0 * math.sqrt(k) + 20.0
    while poisson_delta_mu(hi, k)[0] > poisson_delta_mu(hi, k)[1]:
        hi *= 2.0

    def h_closed(rate: float) -> float:
        d, m = poisson_delta_mu(rate, k)
        return d - m

    for _ in range(200):
        if hi - lo <= 4.0 * math.ulp(max(1.0, hi)):
            break
        mid = 0.5 * (lo + hi)
        if h_closed(mid) > 0.0:
            lo = mid
        else:
            hi = mid

    # Re-bracket for the PMF route: the two routes agree to ~1e-13 in the
    # statistics, which shifts the root by well under this pad.
    pad = max(256.0 * math.ulp(max(1.0, hi)), 4.0 * (hi - lo))
    lo, hi = max(0.0, lo - pad), hi + pad
    while _pmf_residual(lo, k)[0] <= 0.0 and lo > 0.0:
        lo = max(0.0, lo - pad)
        pad *= 4.0
    while _pmf_residual(hi, k)[0] > 0.0:
        hi += pad
        pad *= 4.0

    rate = 0.5 * (lo + hi)
    best = _pmf_residual(rate, k)
    for _ in range(100):
        if abs(best[0]) <= RATE_RESIDUAL_TOL:
            break
        if best[0] > 0.0:
            lo = rate
        else:
            hi = rate
        new_rate = 0.5 * (lo + hi)
        if new_rate == rate or hi - lo <= 4.0 * math.ulp(hi):
            break
        rate = new_rate
        best = _pmf_residual(rate, k)

    phi = best[1]
    gap = (1.0 - phi) * math.sqrt(k / math.log(k)) if k >= 2 else float("nan")
    return RatioPoint(k=k, rate=rate, phi=phi, alaei=alaei_ratio(k), asymptotic_gap=gap)


def alaei_ratio(k: int) -> float:
    """Adaptive-policy baseline guarantee 1 - sqrt(1/(k+3))."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return 1.0 - math.sqrt(1.0 / (k + 3))


def ratio_table(k_min: int, k_max: int) -> list[RatioPoint]:
    if k_min < 1 or k_max < k_min:
        raise ValueError("need 1 <= k_min <= k_max")
    return [solve_poisson_rate(k) for k in range(k_min, k_max + 1)]


def baseline_crossover(k_max: int = 200) -> int | None:
    """Smallest k where the adaptive baseline meets or beats the static curve."""
    for k in range(2, k_max + 1):
        point = solve_poisson_rate(k)
        if point.alaei >= point.phi:
            return k
    return None

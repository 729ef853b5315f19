"""Solves for the static price equalizing sellout and sell-through odds.

g(p) = delta_k - mu_k is monotone non-decreasing in the price, so bisection
always converges. Discrete value priors make g jump at atom prices; there the
solver pins the price to the atom and bisects on the tie-break probability q,
which restores continuity (a buyer whose value ties the price buys with
probability q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counts import BiasProfile, profile_delta_mu
from .distributions import Instance

__all__ = [
    "PricingResult",
    "BracketNotFoundError",
    "evaluate_price",
    "solve_static_price",
    "guarantee_lower_bound",
]

RESIDUAL_TOL = 1e-10
PRICE_BRACKET_TOL = 1e-12
ATOM_MASS_TOL = 1e-12
MAX_ITER = 200


class BracketNotFoundError(RuntimeError):
    """No sign change of delta - mu on the searched price range."""


@dataclass(frozen=True)
class PricingResult:
    price: float
    tie_break: float
    delta: float
    mu: float
    guarantee: float
    effective_biases: BiasProfile

    def to_json(self) -> dict:
        return {
            "price": self.price,
            "tie_break": self.tie_break,
            "delta": self.delta,
            "mu": self.mu,
            "guarantee": self.guarantee,
        }


def _effective_biases(instance: Instance, p: float, q: float) -> np.ndarray:
    """Purchase probability per buyer at price p with tie-break q."""
    b = np.array(
        [d.strict_tail(p) + q * d.atom(p) for d in instance.distributions]
    )
    return np.clip(b, 0.0, 1.0)


def evaluate_price(instance: Instance, p: float, q: float = 1.0) -> tuple[float, float]:
    """(delta_k, mu_k) of the demand count at price p with tie-break q."""
    if p < 0:
        raise ValueError("price must be nonnegative")
    if not 0.0 <= q <= 1.0:
        raise ValueError("tie-break probability must lie in [0, 1]")
    return profile_delta_mu(_effective_biases(instance, p, q), instance.k)


def _gap(instance: Instance, p: float, q: float) -> float:
    d, m = evaluate_price(instance, p, q)
    return d - m


def _upper_bracket(instance: Instance) -> float:
    hi = max(d.quantile(1.0 - 1e-9) for d in instance.distributions)
    if hi <= 0.0:
        hi = 1.0
    for _ in range(MAX_ITER):
        if _gap(instance, hi, 1.0) > 0.0:
            return hi
        hi *= 2.0
    raise BracketNotFoundError(
        "delta - mu never becomes positive; check that n > k and every "
        "buyer has Pr[v > 0] > 0"
    )


def _solve_tie_break(instance: Instance, p: float) -> float:
    """Bisect on q at a fixed atom price; delta - mu is non-increasing in q."""
    q_lo, q_hi = 0.0, 1.0
    for _ in range(MAX_ITER):
        q_mid = 0.5 * (q_lo + q_hi)
        g = _gap(instance, p, q_mid)
        if abs(g) <= RESIDUAL_TOL:
            return q_mid
        if g > 0.0:
            q_lo = q_mid
        else:
            q_hi = q_mid
        if q_hi - q_lo <= 1e-15:
            break
    return 0.5 * (q_lo + q_hi)


def _atom_candidates(instance: Instance, lo: float, hi: float) -> list[float]:
    pts = [
        a
        for a in instance.atom_prices()
        if lo - PRICE_BRACKET_TOL <= a <= hi + PRICE_BRACKET_TOL
    ]
    return [
        a
        for a in pts
        if sum(d.atom(a) for d in instance.distributions) > ATOM_MASS_TOL
    ]


def solve_static_price(instance: Instance) -> PricingResult:
    """Find (price, tie-break) with |delta_k - mu_k| <= 1e-10.

    Bisection on the price with atoms counted as demand (q = 1); if the gap
    jumps across zero at an atom, the price is pinned there and the tie-break
    probability is bisected instead. Among equally valid equalizing prices the
    smallest is returned.
    """
    lo, q = 0.0, 1.0
    hi = _upper_bracket(instance)
    # invariant throughout: g(lo) < 0 <= g(hi)
    for _ in range(MAX_ITER):
        if hi - lo <= PRICE_BRACKET_TOL * max(1.0, lo):
            break
        mid = 0.5 * (lo + hi)
        if _gap(instance, mid, 1.0) >= 0.0:
            hi = mid
        else:
            lo = mid

    price = hi
    if abs(_gap(instance, price, 1.0)) > RESIDUAL_TOL:
        # the gap jumps inside [lo, hi]: land on the atom and randomize ties
        solved = False
        for atom_price in _atom_candidates(instance, lo, hi):
            g_all = _gap(instance, atom_price, 1.0)
            g_none = _gap(instance, atom_price, 0.0)
            if g_none >= -RESIDUAL_TOL and g_all <= RESIDUAL_TOL:
                price = atom_price
                q = _solve_tie_break(instance, atom_price)
                solved = True
                break
        if not solved:
            raise BracketNotFoundError(
                "gap jumps across zero but no atom price explains it"
            )

    biases = _effective_biases(instance, price, q)
    d, m = profile_delta_mu(biases, instance.k)
    return PricingResult(
        price=price,
        tie_break=q,
        delta=d,
        mu=m,
        guarantee=min(d, m),
        effective_biases=BiasProfile(biases),
    )


def guarantee_lower_bound(instance: Instance, result: PricingResult) -> float:
    """Certified welfare-to-optimum ratio at this price, any arrival order."""
    return min(result.delta, result.mu)

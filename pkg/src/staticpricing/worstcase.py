"""Numerical corroboration that equal-bias Bernoulli demand is the worst case.

Three tools: a closed-form solver for the two-bias revenue-minimization
subproblem (rewriting the objective along the constraint shows its slope is
governed by the sign of Q2^2 - Q_{>=3}(Q1 - Q2), giving interior-symmetric
versus box-boundary optima), the equal-bias benchmark curve, and a
multi-start feasible-descent search over bias profiles that uses the
subproblem solver as its pairwise move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .counts import (
    BiasProfile,
    binomial_delta_mu,
    poisson_binomial,
    profile_delta_mu,
)

__all__ = [
    "TwoBiasSubproblem",
    "TwoBiasSolution",
    "SearchResult",
    "InfeasibleSubproblemError",
    "phi_of_profile",
    "equal_bias_phi",
    "solve_two_bias",
    "search_min_phi",
]

_FEAS_TOL = 1e-9
_ONE_BIAS_TOL = 1e-12


class InfeasibleSubproblemError(ValueError):
    """The constraint curve misses the unit box."""


@dataclass(frozen=True)
class TwoBiasSubproblem:
    """Environment of a two-bias reoptimization.

    q1, q2, q_ge3 are the chances that the other buyers leave exactly one,
    exactly two, or three-plus units unclaimed; phi_star is the sellout-odds
    level the pair must preserve.
    """

    q1: float
    q2: float
    q_ge3: float
    phi_star: float

    def __post_init__(self):
        for name in ("q1", "q2", "q_ge3", "phi_star"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.q1 + self.q2 + self.q_ge3 > 1.0 + 1e-12:
            raise ValueError("q1 + q2 + q_ge3 cannot exceed 1")
        if self.phi_star - self.q_ge3 <= 0.0:
            raise ValueError("need phi_star > q_ge3 for a nondegenerate subproblem")

    def constraint(self, r1: float, r2: float) -> float:
        return r1 * r2 * (self.q1 - self.q2) + (r1 + r2) * self.q2

    def objective(self, r1: float, r2: float) -> float:
        return (self.q2 + self.q_ge3) * (r1 + r2) + self.q1 * r1 * r2

    def discriminant(self) -> float:
        return self.q2**2 - self.q_ge3 * (self.q1 - self.q2)


class TwoBiasSolution(NamedTuple):
    r1: float
    r2: float
    objective: float
    case_label: str


def _in_unit(r: float) -> bool:
    return -_FEAS_TOL <= r <= 1.0 + _FEAS_TOL


def _clip01(r: float) -> float:
    return min(max(r, 0.0), 1.0)


def _edge_candidates(sub: TwoBiasSubproblem, c: float) -> list[tuple[float, float]]:
    """Constraint solutions with one coordinate pinned to 0 or 1."""
    out = []
    if sub.q2 > 0.0:
        r = c / sub.q2
        if _in_unit(r):
            out += [(0.0, _clip01(r)), (_clip01(r), 0.0)]
    if sub.q1 > 0.0:
        r = (c - sub.q2) / sub.q1
        if _in_unit(r):
            out += [(1.0, _clip01(r)), (_clip01(r), 1.0)]
    return out


def solve_two_bias(sub: TwoBiasSubproblem) -> TwoBiasSolution:
    """Optimal pair for the revenue-minimization subproblem.

    Maximizes (q2 + q_ge3)(r1 + r2) + q1 r1 r2 over the unit box subject to
    r1 r2 (q1 - q2) + (r1 + r2) q2 = phi_star - q_ge3, by case analysis on
    the closed forms. Whenever the discriminant q2^2 - q_ge3 (q1 - q2) is
    positive the optimum is the symmetric point r1 = r2, returned exactly.
    """
    c = sub.phi_star - sub.q_ge3

    if sub.q2 == 0.0:
        if sub.q1 == 0.0:
            raise InfeasibleSubproblemError("constraint vanishes but phi_star > q_ge3")
        m = c / sub.q1
        if m > 1.0 + _FEAS_TOL:
            raise InfeasibleSubproblemError("required product r1*r2 exceeds 1")
        m = _clip01(m)
        if sub.q_ge3 == 0.0:
            r = math.sqrt(m)
            return TwoBiasSolution(r, r, sub.objective(r, r), "I(a)-flat")
        return TwoBiasSolution(1.0, m, sub.objective(1.0, m), "I(a)")

    if sub.q1 == sub.q2:
        s = c / sub.q2
        if s > 2.0 + _FEAS_TOL:
            raise InfeasibleSubproblemError("required sum r1+r2 exceeds 2")
        r = _clip01(0.5 * s)
        return TwoBiasSolution(r, r, sub.objective(r, r), "I(b)")

    diff = sub.q1 - sub.q2
    a, b = sub.q2 / diff, c / diff
    disc = sub.discriminant()

    symmetric = None
    rad = a * a + b
    if rad >= 0.0:
        for root in (-a + math.sqrt(rad), -a - math.sqrt(rad)):
            if _in_unit(root):
                symmetric = _clip01(root)
                break

    if disc > 0.0:
        if symmetric is None:
            raise InfeasibleSubproblemError("no symmetric point on the curve in the box")
        label = "II(a)" if diff < 0.0 else "II(b)"
        return TwoBiasSolution(symmetric, symmetric, sub.objective(symmetric, symmetric), label)

    candidates = _edge_candidates(sub, c)
    if symmetric is not None:
        candidates.append((symmetric, symmetric))
    if not candidates:
        raise InfeasibleSubproblemError("constraint curve misses the unit box")
    if disc == 0.0:
        # objective constant along the curve; prefer the symmetric point
        r1, r2 = (symmetric, symmetric) if symmetric is not None else candidates[0]
        return TwoBiasSolution(r1, r2, sub.objective(r1, r2), "G0")
    best = max(candidates, key=lambda rr: sub.objective(*rr))
    return TwoBiasSolution(best[0], best[1], sub.objective(*best), "II(c)")


# ---------------------------------------------------------------------------
# Profile evaluation and the equal-bias benchmark
# ---------------------------------------------------------------------------


def phi_of_profile(profile, k: int) -> float:
    """min(delta_k, mu_k) of the Bernoulli-sum demand count."""
    return min(profile_delta_mu(profile, k))


def equal_bias_phi(n: int, k: int) -> tuple[float, float]:
    """Bias and guarantee of the n-buyer equal-bias instance with
    delta_k = mu_k, found by bisection on the binomial closed forms."""
    if n <= k:
        raise ValueError("need n > k")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        d, m = binomial_delta_mu(n, mid, k)
        if abs(d - m) <= 1e-12 or hi - lo <= 1e-16:
            return mid, min(d, m)
        if d - m > 0.0:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    d, m = binomial_delta_mu(n, mid, k)
    return mid, min(d, m)


# ---------------------------------------------------------------------------
# Multi-start feasible-descent search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    n: int
    k: int
    best_biases: BiasProfile
    best_phi: float
    equal_bias_phi: float
    gap: float

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "best_biases": [float(b) for b in self.best_biases.biases],
            "best_phi": self.best_phi,
            "equal_bias_phi": self.equal_bias_phi,
            "gap": self.gap,
        }


def _equalize_direction(u: np.ndarray, k: int) -> tuple[np.ndarray, float] | None:
    """Scale the direction u until delta_k = mu_k; None if the equalized
    profile is degenerate (k or more biases pinned at 1)."""
    if np.all(u <= 0.0):
        return None

    def gap(theta: float) -> float:
        d, m = profile_delta_mu(np.clip(theta * u, 0.0, 1.0), k)
        return d - m

    hi = 1.0
    for _ in range(80):
        if gap(hi) < 0.0:
            break
        hi *= 2.0
    else:
        return None
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    theta = 0.5 * (lo + hi)
    biases = np.clip(theta * u, 0.0, 1.0)
    if int(np.sum(biases >= 1.0 - _ONE_BIAS_TOL)) >= k:
        return None
    return biases, phi_of_profile(biases, k)


def _pairwise_environment(biases: np.ndarray, i: int, j: int, k: int):
    """(q1, q2, q_ge3) of the demand count from everyone except buyers i, j."""
    others = np.delete(biases, [i, j])
    pmf = poisson_binomial(others).pmf

    def at(idx: int) -> float:
        return float(pmf[idx]) if 0 <= idx < len(pmf) else 0.0

    q1 = at(k - 1)
    q2 = at(k - 2)
    q_ge3 = float(np.sum(pmf[: max(k - 2, 0)]))
    return q1, q2, q_ge3


def search_min_phi(n: int, k: int, restarts: int, seed: int) -> SearchResult:
    """Best-effort minimization of the equalized guarantee over bias profiles.

    Each restart runs coordinate tweaks plus pairwise reoptimization through
    solve_two_bias, re-equalizing after every move so iterates stay on the
    delta = mu surface. The result upper-bounds the true minimum; the
    equal-bias value rides along as the benchmark.
    """
    if n <= k:
        raise ValueError("need n > k")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")

    eq_bias, eq_phi = equal_bias_phi(n, k)
    best_biases = np.full(n, eq_bias)
    best_phi = phi_of_profile(best_biases, k)

    for restart in range(restarts):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(restart,))
        )
        if restart == 0:
            u = np.full(n, eq_bias)
        else:
            u = rng.uniform(0.02, 1.0, n)
        state = _equalize_direction(u, k)
        if state is None:
            continue
        biases, phi = state

        for _ in range(30):
            improved = False
            delta_now = phi  # equalized, so delta = mu = phi up to tolerance
            for i in range(n):
                for j in range(i + 1, n):
                    q1, q2, q_ge3 = _pairwise_environment(biases, i, j, k)
                    if delta_now - q_ge3 <= 1e-14:
                        continue
                    try:
                        sub = TwoBiasSubproblem(q1=q1, q2=q2, q_ge3=q_ge3, phi_star=delta_now)
                        sol = solve_two_bias(sub)
                    except (ValueError, InfeasibleSubproblemError):
                        continue
                    trial = biases.copy()
                    trial[i] = 1.0 - sol.r1
                    trial[j] = 1.0 - sol.r2
                    state = _equalize_direction(trial, k)
                    if state is not None and state[1] < phi - 1e-10:
                        biases, phi = state
                        improved = True
            for _ in range(2 * n):
                idx = int(rng.integers(n))
                trial = biases.copy()
                trial[idx] = min(max(trial[idx] * math.exp(rng.normal(0.0, 0.4)), 1e-6), 1.0)
                state = _equalize_direction(trial, k)
                if state is not None and state[1] < phi - 1e-10:
                    biases, phi = state
                    improved = True
            if not improved:
                break

        if phi < best_phi:
            best_phi, best_biases = phi, biases

    return SearchResult(
        n=n,
        k=k,
        best_biases=BiasProfile(np.asarray(best_biases)),
        best_phi=best_phi,
        equal_bias_phi=eq_phi,
        gap=best_phi - eq_phi,
    )

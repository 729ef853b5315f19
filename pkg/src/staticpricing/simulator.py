"""Monte Carlo engine for the sequential posted-price sale.

Buyers arrive in a fixed order, each buys one unit while supply lasts if
their realized value beats the price (ties buy with the tie-break
probability). Trials are vectorized in fixed-size blocks; every block draws
from its own RNG stream keyed by (seed, block index), so results are
byte-identical no matter how blocks are scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import Instance
from .pricer import PricingResult, evaluate_price

__all__ = [
    "SimulationReport",
    "DecompositionReport",
    "ORDER_CHOICES",
    "run_sale",
    "hindsight_opt",
    "resolve_order",
    "estimate",
    "decomposition_check",
]

BLOCK_SIZE = 1 << 16
ORDER_CHOICES = ("given", "reverse", "random", "desc", "asc")
_ORDER_STREAM_KEY = 0x0DD5


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    welfare_mean: float
    revenue_mean: float
    utility_mean: float
    opt_mean: float
    welfare_se: float
    revenue_se: float
    utility_se: float
    opt_se: float
    ratio: float
    ratio_se: float
    seed: int

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "welfare_mean": self.welfare_mean,
            "revenue_mean": self.revenue_mean,
            "utility_mean": self.utility_mean,
            "opt_mean": self.opt_mean,
            "welfare_std_error": self.welfare_se,
            "revenue_std_error": self.revenue_se,
            "utility_std_error": self.utility_se,
            "opt_std_error": self.opt_se,
            "ratio": self.ratio,
            "ratio_std_error": self.ratio_se,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class DecompositionReport:
    report: SimulationReport
    upper_bound: float
    sellout_rate: float
    delta: float
    mu: float
    utility_floor: float
    opt_within_bound: bool
    revenue_matches: bool
    utility_above_floor: bool

    def all_pass(self) -> bool:
        return self.opt_within_bound and self.revenue_matches and self.utility_above_floor

    def to_json(self) -> dict:
        return {
            "upper_bound": self.upper_bound,
            "sellout_rate": self.sellout_rate,
            "delta": self.delta,
            "mu": self.mu,
            "utility_floor": self.utility_floor,
            "opt_within_bound": self.opt_within_bound,
            "revenue_matches": self.revenue_matches,
            "utility_above_floor": self.utility_above_floor,
        }


def run_sale(instance: Instance, price: float, q: float, values, tie_coins=None):
    """One realized sale pass: returns (welfare, revenue, utility, units_sold).

    values follow the instance's canonical buyer indexing; arrival uses
    instance.order(). Ties at the price need tie_coins (uniforms compared
    against q) unless q is 0 or 1.
    """
    values = np.asarray(values, dtype=float)
    if len(values) != instance.n:
        raise ValueError("need one value per buyer")
    supply = instance.k
    welfare = revenue = utility = 0.0
    units = 0
    for t in instance.order():
        if supply == 0:
            break
        v = values[t]
        if v > price:
            wants = True
        elif v == price:
            if q >= 1.0:
                wants = True
            elif q <= 0.0:
                wants = False
            elif tie_coins is None:
                raise ValueError("tie at the price with fractional q needs tie_coins")
            else:
                wants = tie_coins[t] < q
        else:
            wants = False
        if wants:
            supply -= 1
            units += 1
            welfare += v
            revenue += price
            utility += v - price
    return welfare, revenue, utility, units


def hindsight_opt(values, k: int) -> float:
    """Sum of the k largest realized values."""
    values = np.asarray(values, dtype=float)
    if k >= len(values):
        return float(np.sum(values))
    return float(np.sum(np.partition(values, len(values) - k)[len(values) - k :]))


def resolve_order(instance: Instance, order, seed: int = 0) -> tuple[int, ...]:
    """Turn an order name (given/reverse/random/desc/asc) or index sequence
    into a buyer permutation."""
    if order is None:
        return instance.order()
    if not isinstance(order, str):
        order = tuple(int(t) for t in order)
        if sorted(order) != list(range(instance.n)):
            raise ValueError("order must be a permutation of 0..n-1")
        return order
    if order not in ORDER_CHOICES:
        raise ValueError(f"order must be one of {ORDER_CHOICES}")
    base = instance.order()
    if order == "given":
        return base
    if order == "reverse":
        return tuple(reversed(base))
    if order == "random":
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(_ORDER_STREAM_KEY,))
        )
        return tuple(int(t) for t in rng.permutation(instance.n))
    means = [d.mean() for d in instance.distributions]
    idx = sorted(range(instance.n), key=lambda t: (means[t], t))
    if order == "desc":
        idx = idx[::-1]
    return tuple(idx)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


def _simulate_block(instance, price, q, order, seed, block, size):
    """Per-trial totals for one block; returns raw moment accumulators."""
    rng = _block_rng(seed, block)
    n, k = instance.n, instance.k
    values = np.empty((size, n))
    for t, dist in enumerate(instance.distributions):
        values[:, t] = dist.sample(rng, size)
    demand = values > price
    if instance.has_atoms():
        coins = rng.random((size, n))
        if q > 0.0:
            demand |= (values == price) & (coins < q)

    cols = np.asarray(order)
    demand_seq = demand[:, cols]
    taken_before = np.cumsum(demand_seq, axis=1) - demand_seq
    buy = demand_seq & (taken_before < k)

    units = buy.sum(axis=1)
    welfare = np.where(buy, values[:, cols], 0.0).sum(axis=1)
    revenue = price * units
    utility = welfare - revenue
    if k >= n:
        opt = values.sum(axis=1)
    else:
        opt = np.partition(values, n - k, axis=1)[:, n - k :].sum(axis=1)
    excess = np.clip(values - price, 0.0, None).sum(axis=1)

    def mom(x):
        return float(np.sum(x)), float(np.dot(x, x))

    out = {}
    out["welfare"], out["welfare2"] = mom(welfare)
    out["revenue"], out["revenue2"] = mom(revenue)
    out["utility"], out["utility2"] = mom(utility)
    out["opt"], out["opt2"] = mom(opt)
    out["welfare_opt"] = float(np.dot(welfare, opt))
    out["excess"] = float(np.sum(excess))
    out["sellout"] = float(np.sum(units >= k))
    return out


_MOMENT_KEYS = (
    "welfare", "welfare2", "revenue", "revenue2", "utility", "utility2",
    "opt", "opt2", "welfare_opt", "excess", "sellout",
)


def _run_blocks(instance, price, q, order, trials, seed, threads):
    blocks = [
        (b, min(BLOCK_SIZE, trials - b * BLOCK_SIZE))
        for b in range((trials + BLOCK_SIZE - 1) // BLOCK_SIZE)
    ]
    results = [None] * len(blocks)

    def work(i):
        b, size = blocks[i]
        results[i] = _simulate_block(instance, price, q, order, seed, b, size)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(len(blocks))))
    else:
        for i in range(len(blocks)):
            work(i)

    # fixed-order compensated combination keeps totals thread-count invariant
    return {key: math.fsum(r[key] for r in results) for key in _MOMENT_KEYS}


def _mean_se(total, total_sq, trials):
    mean = total / trials
    if trials < 2:
        return mean, 0.0
    var = max(total_sq - trials * mean * mean, 0.0) / (trials - 1)
    return mean, math.sqrt(var / trials)


def estimate(
    instance: Instance,
    pricing: PricingResult,
    trials: int,
    seed: int,
    order=None,
    threads: int = 1,
) -> SimulationReport:
    """Monte Carlo estimates of welfare, revenue, utility, hindsight optimum,
    and the welfare-to-optimum ratio, with standard errors."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    order = resolve_order(instance, order, seed)
    acc = _run_blocks(instance, pricing.price, pricing.tie_break, order, trials, seed, threads)
    return _report_from_moments(acc, trials, seed)


def _report_from_moments(acc, trials, seed) -> SimulationReport:
    welfare, welfare_se = _mean_se(acc["welfare"], acc["welfare2"], trials)
    revenue, revenue_se = _mean_se(acc["revenue"], acc["revenue2"], trials)
    utility, utility_se = _mean_se(acc["utility"], acc["utility2"], trials)
    opt, opt_se = _mean_se(acc["opt"], acc["opt2"], trials)

    ratio = welfare / opt if opt > 0 else 0.0
    ratio_se = 0.0
    if trials >= 2 and opt > 0:
        var_w = max(acc["welfare2"] - trials * welfare**2, 0.0) / (trials - 1)
        var_o = max(acc["opt2"] - trials * opt**2, 0.0) / (trials - 1)
        cov = (acc["welfare_opt"] - trials * welfare * opt) / (trials - 1)
        var_ratio = max(var_w - 2.0 * ratio * cov + ratio**2 * var_o, 0.0) / (opt**2)
        ratio_se = math.sqrt(var_ratio / trials)

    return SimulationReport(
        trials=trials,
        welfare_mean=welfare,
        revenue_mean=revenue,
        utility_mean=utility,
        opt_mean=opt,
        welfare_se=welfare_se,
        revenue_se=revenue_se,
        utility_se=utility_se,
        opt_se=opt_se,
        ratio=ratio,
        ratio_se=ratio_se,
        seed=seed,
    )


def decomposition_check(
    instance: Instance,
    pricing: PricingResult,
    trials: int,
    seed: int,
    order=None,
    threads: int = 1,
) -> DecompositionReport:
    """Checks the revenue/utility split against its analytic anchors:
    the hindsight optimum stays below k*p plus total excess value, revenue
    matches mu*k*p, and utility clears delta times the excess-value total.
    All comparisons use 4 standard errors of slack."""
    p, q, k = pricing.price, pricing.tie_break, instance.k
    order = resolve_order(instance, order, seed)
    acc = _run_blocks(instance, p, q, order, trials, seed, threads)
    report = _report_from_moments(acc, trials, seed)
    delta, mu = evaluate_price(instance, p, q)
    excess_total = sum(d.mean_above(p) for d in instance.distributions)
    upper = k * p + excess_total
    floor = delta * excess_total
    slack = 1e-9 * max(1.0, upper)

    opt_ok = report.opt_mean <= upper + 4.0 * report.opt_se + slack
    rev_ok = abs(report.revenue_mean - mu * k * p) <= 4.0 * report.revenue_se + slack
    util_ok = report.utility_mean >= floor - 4.0 * report.utility_se - slack

    return DecompositionReport(
        report=report,
        upper_bound=upper,
        sellout_rate=acc["sellout"] / trials,
        delta=delta,
        mu=mu,
        utility_floor=floor,
        opt_within_bound=opt_ok,
        revenue_matches=rev_ok,
        utility_above_floor=util_ok,
    )

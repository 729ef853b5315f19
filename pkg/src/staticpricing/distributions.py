"""Buyer value priors and sale instances.

Each family exposes the closed-form statistics the price solver needs
(weak/strict tail, atom mass, truncated mean, quantile) plus vectorized
sampling against a caller-owned numpy Generator. The family set is closed:
new families are added here, with exact formulas, not plugged in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

__all__ = [
    "ValueDistribution",
    "PointMass",
    "Bernoulli",
    "Uniform",
    "Exponential",
    "Discrete",
    "TruncatedNormal",
    "Instance",
    "instance_from_json",
    "instance_to_json",
    "load_instance",
]

_MASS_TOL = 1e-12


class ValueDistribution:
    """Base class for nonnegative value priors.

    tail(p) is the weak tail Pr[v >= p] (atoms at p included) and
    strict_tail(p) is Pr[v > p]; tail(p) = strict_tail(p) + atom(p)
    holds exactly per family. mean_above(p) is E[(v - p)^+].
    """

    def tail(self, p: float) -> float:
        raise NotImplementedError

    def strict_tail(self, p: float) -> float:
        raise NotImplementedError

    def atom(self, p: float) -> float:
        raise NotImplementedError

    def mean_above(self, p: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def quantile(self, u: float) -> float:
        """Smallest value v with Pr[value <= v] >= u, for u in (0, 1)."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def atom_values(self) -> tuple[float, ...]:
        """Locations of point masses (empty for continuous families)."""
        return ()

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(ValueDistribution):
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("point mass value must be nonnegative")

    def tail(self, p):
        return 1.0 if p <= self.value else 0.0

    def strict_tail(self, p):
        return 1.0 if p < self.value else 0.0

    def atom(self, p):
        return 1.0 if p == self.value else 0.0

    def mean_above(self, p):
        return max(self.value - p, 0.0)

    def mean(self):
        return self.value

    def quantile(self, u):
        return self.value

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def atom_values(self):
        return (self.value,)

    def to_json(self):
        return {"family": "point_mass", "value": self.value}


@dataclass(frozen=True)
class Bernoulli(ValueDistribution):
    """Takes `value` with probability `bias`, else 0."""

    value: float
    bias: float

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("bernoulli value must be positive")
        if not 0.0 <= self.bias <= 1.0:
            raise ValueError("bernoulli bias must lie in [0, 1]")

    def tail(self, p):
        if p <= 0:
            return 1.0
        return self.bias if p <= self.value else 0.0

    def strict_tail(self, p):
        if p < 0:
            return 1.0
        return self.bias if p < self.value else 0.0

    def atom(self, p):
        if p == 0.0:
            return 1.0 - self.bias
        return self.bias if p == self.value else 0.0

    def mean_above(self, p):
        return self.bias * max(self.value - p, 0.0)

    def mean(self):
        return self.bias * self.value

    def quantile(self, u):
        return 0.0 if u <= 1.0 - self.bias else self.value

    def sample(self, rng, size=None):
        if size is None:
            return self.value if rng.random() < self.bias else 0.0
        return np.where(rng.random(size) < self.bias, self.value, 0.0)

    def atom_values(self):
        return (0.0, self.value)

    def to_json(self):
        return {"family": "bernoulli", "value": self.value, "bias": self.bias}


@dataclass(frozen=True)
class Uniform(ValueDistribution):
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo < 0:
            raise ValueError("uniform lower end must be nonnegative")
        if self.hi <= self.lo:
            raise ValueError("uniform upper end must exceed lower end")

    def tail(self, p):
        if p <= self.lo:
            return 1.0
        if p >= self.hi:
            return 0.0
        return (self.hi - p) / (self.hi - self.lo)

    def strict_tail(self, p):
        return self.tail(p)

    def atom(self, p):
        return 0.0

    def mean_above(self, p):
        if p <= self.lo:
            return 0.5 * (self.lo + self.hi) - p
        if p >= self.hi:
            return 0.0
        return 0.5 * (self.hi - p) ** 2 / (self.hi - self.lo)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def quantile(self, u):
        return self.lo + u * (self.hi - self.lo)

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    def to_json(self):
        return {"family": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Exponential(ValueDistribution):
    """Shifted exponential: shift + Exp(rate)."""

    rate: float
    shift: float = 0.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("exponential rate must be positive")
        if self.shift < 0:
            raise ValueError("exponential shift must be nonnegative")

    def tail(self, p):
        if p <= self.shift:
            return 1.0
        return math.exp(-self.rate * (p - self.shift))

    def strict_tail(self, p):
        return self.tail(p)

    def atom(self, p):
        return 0.0

    def mean_above(self, p):
        if p <= self.shift:
            return self.shift - p + 1.0 / self.rate
        return math.exp(-self.rate * (p - self.shift)) / self.rate

    def mean(self):
        return self.shift + 1.0 / self.rate

    def quantile(self, u):
        return self.shift - math.log1p(-u) / self.rate

    def sample(self, rng, size=None):
        return self.shift + rng.exponential(1.0 / self.rate, size)

    def to_json(self):
        return {"family": "exponential", "rate": self.rate, "shift": self.shift}


@dataclass(frozen=True)
class Discrete(ValueDistribution):
    """Finite support given as a sorted tuple of (value, mass) pairs."""

    support: tuple[tuple[float, float], ...]

    def __post_init__(self):
        values = [v for v, _ in self.support]
        masses = [m for _, m in self.support]
        if not values:
            raise ValueError("discrete support must be nonempty")
        if any(v < 0 for v in values):
            raise ValueError("discrete support must be nonnegative")
        if sorted(values) != values or len(set(values)) != len(values):
            raise ValueError("discrete support must be sorted with distinct values")
        if any(m < 0 for m in masses):
            raise ValueError("discrete masses must be nonnegative")
        if abs(sum(masses) - 1.0) > _MASS_TOL:
            raise ValueError("discrete masses must sum to 1 within 1e-12")
        object.__setattr__(self, "support", tuple((float(v), float(m)) for v, m in self.support))

    def _values(self):
        return np.array([v for v, _ in self.support])

    def _masses(self):
        return np.array([m for _, m in self.support])

    def tail(self, p):
        return float(sum(m for v, m in self.support if v >= p))

    def strict_tail(self, p):
        return float(sum(m for v, m in self.support if v > p))

    def atom(self, p):
        return float(sum(m for v, m in self.support if v == p))

    def mean_above(self, p):
        return float(sum(m * (v - p) for v, m in self.support if v > p))

    def mean(self):
        return float(sum(v * m for v, m in self.support))

    def quantile(self, u):
        acc = 0.0
        for v, m in self.support:
            acc += m
            if acc >= u:
                return v
        return self.support[-1][0]

    def sample(self, rng, size=None):
        values, masses = self._values(), self._masses()
        if size is None:
            return float(rng.choice(values, p=masses))
        return rng.choice(values, size=size, p=masses)

    def atom_values(self):
        return tuple(v for v, _ in self.support)

    def to_json(self):
        return {"family": "discrete", "support": [[v, m] for v, m in self.support]}


@dataclass(frozen=True)
class TruncatedNormal(ValueDistribution):
    """Normal(mean, stddev) conditioned on being nonnegative (no atom at 0)."""

    mean_param: float
    stddev: float

    def __post_init__(self):
        if self.stddev <= 0:
            raise ValueError("stddev must be positive")

    @property
    def _z(self):
        # Pr[N(mean, sd) >= 0], the conditioning constant
        return norm.sf(-self.mean_param / self.stddev)

    def tail(self, p):
        if p <= 0:
            return 1.0
        return float(norm.sf((p - self.mean_param) / self.stddev) / self._z)

    def strict_tail(self, p):
        return self.tail(p)

    def atom(self, p):
        return 0.0

    def mean_above(self, p):
        p = max(p, 0.0)
        alpha = (p - self.mean_param) / self.stddev
        partial = self.stddev * norm.pdf(alpha) + (self.mean_param - p) * norm.sf(alpha)
        return float(partial / self._z)

    def mean(self):
        return self.mean_above(0.0)

    def quantile(self, u):
        lo_cdf = norm.cdf(-self.mean_param / self.stddev)
        return float(self.mean_param + self.stddev * norm.ppf(lo_cdf + u * (1.0 - lo_cdf)))

    def sample(self, rng, size=None):
        # Inverse-CDF sampling: one uniform per draw keeps stream accounting exact.
        u = rng.random(size)
        lo_cdf = norm.cdf(-self.mean_param / self.stddev)
        x = self.mean_param + self.stddev * norm.ppf(lo_cdf + u * (1.0 - lo_cdf))
        if size is None:
            return float(x)
        return np.asarray(x)

    def to_json(self):
        return {"family": "truncated_normal", "mean": self.mean_param, "stddev": self.stddev}


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """Supply k plus the ordered list of buyer priors.

    The list order only matters to the simulator (it is the default arrival
    order); every pricing quantity is order-oblivious.
    """

    k: int
    distributions: tuple[ValueDistribution, ...]
    arrival_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("supply k must be at least 1")
        object.__setattr__(self, "distributions", tuple(self.distributions))
        n = len(self.distributions)
        if n <= self.k:
            raise ValueError(
                f"need more buyers than units: n={n} must exceed k={self.k}"
            )
        for i, d in enumerate(self.distributions):
            if d.strict_tail(0.0) <= 0.0:
                raise ValueError(f"buyer {i} has Pr[v > 0] = 0; drop it from the instance")
        if self.arrival_order is not None:
            order = tuple(int(t) for t in self.arrival_order)
            if sorted(order) != list(range(n)):
                raise ValueError("arrival_order must be a permutation of 0..n-1")
            object.__setattr__(self, "arrival_order", order)

    @property
    def n(self) -> int:
        return len(self.distributions)

    def order(self) -> tuple[int, ...]:
        return self.arrival_order if self.arrival_order is not None else tuple(range(self.n))

    def has_atoms(self) -> bool:
        return any(d.atom_values() for d in self.distributions)

    def atom_prices(self) -> list[float]:
        """Sorted distinct price points carrying an atom for some buyer."""
        pts = set()
        for d in self.distributions:
            pts.update(d.atom_values())
        return sorted(pts)


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------

_FAMILY_FIELDS = {
    "point_mass": {"value"},
    "bernoulli": {"value", "bias"},
    "uniform": {"lo", "hi"},
    "exponential": {"rate", "shift"},
    "discrete": {"support"},
    "truncated_normal": {"mean", "stddev"},
}


def _distribution_from_json(obj: dict) -> ValueDistribution:
    if not isinstance(obj, dict) or "family" not in obj:
        raise ValueError("each distribution needs a 'family' field")
    family = obj["family"]
    if family not in _FAMILY_FIELDS:
        raise ValueError(f"unknown distribution family {family!r}")
    extra = set(obj) - _FAMILY_FIELDS[family] - {"family"}
    if extra:
        raise ValueError(f"unknown fields {sorted(extra)} for family {family!r}")
    missing = _FAMILY_FIELDS[family] - set(obj)
    if missing:
        raise ValueError(f"missing fields {sorted(missing)} for family {family!r}")
    if family == "point_mass":
        return PointMass(float(obj["value"]))
    if family == "bernoulli":
        return Bernoulli(float(obj["value"]), float(obj["bias"]))
    if family == "uniform":
        return Uniform(float(obj["lo"]), float(obj["hi"]))
    if family == "exponential":
        return Exponential(float(obj["rate"]), float(obj["shift"]))
    if family == "discrete":
        return Discrete(tuple((float(v), float(m)) for v, m in obj["support"]))
    return TruncatedNormal(float(obj["mean"]), float(obj["stddev"]))


def instance_from_json(obj: dict) -> Instance:
    if not isinstance(obj, dict):
        raise ValueError("instance JSON must be an object")
    extra = set(obj) - {"k", "distributions", "order"}
    if extra:
        raise ValueError(f"unknown instance fields {sorted(extra)}")
    if "k" not in obj or "distributions" not in obj:
        raise ValueError("instance JSON needs 'k' and 'distributions'")
    if not isinstance(obj["k"], int):
        raise ValueError("'k' must be an integer")
    dists = tuple(_distribution_from_json(d) for d in obj["distributions"])
    order = tuple(obj["order"]) if "order" in obj else None
    return Instance(k=obj["k"], distributions=dists, arrival_order=order)


def instance_to_json(instance: Instance) -> dict:
    obj = {
        "k": instance.k,
        "distributions": [d.to_json() for d in instance.distributions],
    }
    if instance.arrival_order is not None:
        obj["order"] = list(instance.arrival_order)
    return obj


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as f:
        return instance_from_json(json.load(f))

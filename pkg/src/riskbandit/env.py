"""Reward distributions and bandit instances with known ground-truth moments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, ClassVar, Sequence

import numpy as np

__all__ = [
    "Gaussian",
    "TruncatedGaussian",
    "Bernoulli",
    "Uniform",
    "DiscreteFinite",
    "RewardDistribution",
    "BanditInstance",
    "sample",
    "instance_toy2",
    "instance_toy10",
    "instance_random_hard",
    "named_instance",
    "distribution_from_dict",
    "INSTANCE_NAMES",
]


class RewardDistribution:
    """Base class for a bounded or unbounded scalar reward law.

    Subclasses are frozen dataclasses exposing the analytic ``mean`` and
    ``variance`` and drawing samples from a :class:`numpy.random.Generator`.
    """

    kind: ClassVar[str] = ""

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw one reward (``size=None``) or an array of ``size`` i.i.d. rewards."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for f in fields(self):  # type: ignore[arg-type]
            if f.init:
                out[f.name] = getattr(self, f.name)
        return out


@dataclass(frozen=True)
class Gaussian(RewardDistribution):
    mu: float
    std: float

    kind: ClassVar[str] = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.std)) or self.std <= 0:
            raise ValueError(f"Gaussian needs finite mean and std > 0, got ({self.mu}, {self.std})")

    @property
    def mean(self) -> float:
        return float(self.mu)

    @property
    def variance(self) -> float:
        return float(self.std) ** 2

    def sample(self, rng, size=None):
        return rng.normal(self.mu, self.std, size)


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _Phi(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class TruncatedGaussian(RewardDistribution):
    """Normal(mu, std**2) conditioned on ``|R| <= bound``.

    Sampling resamples out-of-range draws; it never clips, so the empirical
    moments match the analytic truncated-normal moments.
    """

    mu: float
    std: float
    bound: float

    kind: ClassVar[str] = "truncated_gaussian"
    max_rejections: ClassVar[int] = 10_000

    def __post_init__(self):
        if self.std <= 0 or self.bound <= 0:
            raise ValueError("TruncatedGaussian needs std > 0 and bound > 0")
        if self._mass() < 1e-12:
            raise ValueError("truncation window carries (numerically) no probability mass")

    def _limits(self) -> tuple[float, float]:
        return (-self.bound - self.mu) / self.std, (self.bound - self.mu) / self.std

    def _mass(self) -> float:
        a, b = self._limits()
        return _Phi(b) - _Phi(a)

    @property
    def mean(self) -> float:
        a, b = self._limits()
        return self.mu + self.std * (_phi(a) - _phi(b)) / self._mass()

    @property
    def variance(self) -> float:
        a, b = self._limits()
        z = self._mass()
        shift = (_phi(a) - _phi(b)) / z
        return self.std**2 * (1.0 + (a * _phi(a) - b * _phi(b)) / z - shift**2)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        out = np.empty(n)
        filled = 0
        for _ in range(self.max_rejections):
            draws = rng.normal(self.mu, self.std, n - filled)
            draws = draws[np.abs(draws) <= self.bound]
            out[filled : filled + draws.size] = draws
            filled += draws.size
            if filled == n:
                return float(out[0]) if size is None else out
        raise RuntimeError("rejection sampler exhausted its retry budget")


@dataclass(frozen=True)
class Bernoulli(RewardDistribution):
    """Takes value ``hi`` with probability ``p`` and ``lo`` otherwise."""

    p: float
    lo: float = 0.0
    hi: float = 1.0

    kind: ClassVar[str] = "bernoulli"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli p must lie in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return self.lo + self.p * (self.hi - self.lo)

    @property
    def variance(self) -> float:
        return self.p * (1.0 - self.p) * (self.hi - self.lo) ** 2

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.where(u < self.p, self.hi, self.lo) if size is not None else (
            self.hi if u < self.p else self.lo
        )


@dataclass(frozen=True)
class Uniform(RewardDistribution):
    lo: float
    hi: float

    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Uniform needs lo < hi, got ({self.lo}, {self.hi})")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class DiscreteFinite(RewardDistribution):
    values: tuple[float, ...]
    probs: tuple[float, ...]

    kind: ClassVar[str] = "discrete"

    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(values) == 0 or len(values) != len(probs):
            raise ValueError("values and probs must be non-empty and of equal length")
        if min(probs) < 0 or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("probs must be non-negative and sum to 1 (within 1e-12)")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cdf", np.cumsum(probs))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "values": list(self.values), "probs": list(self.probs)}

    @property
    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum(p * (v - m) ** 2 for v, p in zip(self.values, self.probs))

    def sample(self, rng, size=None):
        values = np.asarray(self.values)
        idx = np.searchsorted(self._cdf, rng.random(size), side="right")
        idx = np.minimum(idx, len(values) - 1)
        return values[idx] if size is not None else float(values[idx])


_KINDS = {cls.kind: cls for cls in (Gaussian, TruncatedGaussian, Bernoulli, Uniform, DiscreteFinite)}


def distribution_from_dict(data: dict[str, Any]) -> RewardDistribution:
    """Inverse of ``RewardDistribution.to_dict``."""
    params = dict(data)
    kind = params.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}")
    return _KINDS[kind](**params)


def sample(dist: RewardDistribution, rng: np.random.Generator) -> float:
    """Draw a single reward from ``dist``."""
    return float(dist.sample(rng))


@dataclass(frozen=True)
class BanditInstance:
    """A k-armed bandit; the true moments are kept for metrics only."""

    arms: tuple[RewardDistribution, ...]

    def __post_init__(self):
        arms = tuple(self.arms)
        if len(arms) < 2:
            raise ValueError(f"a bandit instance needs k >= 2 arms, got {len(arms)}")
        object.__setattr__(self, "arms", arms)

    @property
    def k(self) -> int:
        return len(self.arms)

    def true_means(self) -> np.ndarray:
        return np.array([arm.mean for arm in self.arms])

    def true_variances(self) -> np.ndarray:
        return np.array([arm.variance for arm in self.arms])

    def risk_values(self, lambda_sigma: float = 1.0, lambda_mu: float = 0.0) -> np.ndarray:
        """Per-arm objective ``lambda_sigma * var_a + lambda_mu * mean_a``."""
        return lambda_sigma * self.true_variances() + lambda_mu * self.true_means()

    def optimal_arm(self, lambda_sigma: float = 1.0, lambda_mu: float = 0.0) -> int:
        # np.argmin returns the lowest index under ties
        return int(np.argmin(self.risk_values(lambda_sigma, lambda_mu)))

    def to_dict(self) -> dict[str, Any]:
        return {"arms": [arm.to_dict() for arm in self.arms]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BanditInstance":
        return cls(tuple(distribution_from_dict(arm) for arm in data["arms"]))


def _gaussians(means: Sequence[float], stds: Sequence[float]) -> BanditInstance:
    return BanditInstance(tuple(Gaussian(float(m), float(s)) for m, s in zip(means, stds)))


def instance_toy2() -> BanditInstance:
    """Two centred Gaussian arms with standard deviations 1 and 2."""
    return _gaussians((0.0, 0.0), (1.0, 2.0))


def instance_toy10() -> BanditInstance:
    """Ten centred Gaussian arms; std 2 everywhere except the last arm (std 1)."""
    return _gaussians((0.0,) * 10, (2.0,) * 9 + (1.0,))


def instance_random_hard(rng: np.random.Generator, k: int = 10) -> BanditInstance:
    """Ten Gaussian arms, means ~ N(4, 1) and variances ~ U[1, 5], drawn in that order."""
    means = rng.normal(4.0, 1.0, k)
    variances = rng.uniform(1.0, 5.0, k)
    return _gaussians(means, np.sqrt(variances))


INSTANCE_NAMES = ("toy2", "toy10", "random_hard")


def named_instance(name: str, rng: np.random.Generator | None = None) -> BanditInstance:
    if name == "toy2":
        return instance_toy2()
    if name == "toy10":
        return instance_toy10()
    if name == "random_hard":
        if rng is None:
            raise ValueError("random_hard needs a random generator")
        return instance_random_hard(rng)
    raise ValueError(f"unknown instance {name!r}; expected one of {INSTANCE_NAMES}")

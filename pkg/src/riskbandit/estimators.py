"""Composite rewards built from reward mini-batches, and the running baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "RiskWeights",
    "VARIANCE_ONLY",
    "Baseline",
    "paired_variance_reward",
    "batch_stats",
    "composite_reward",
    "update_baseline",
]


@dataclass(frozen=True)
class RiskWeights:
    """Weights of the objective ``lambda_sigma * variance + lambda_mu * mean``.

    The objective is minimised, so a negative ``lambda_mu`` rewards a high mean.
    """

    lambda_sigma: float = 1.0
    lambda_mu: float = 0.0

    def __post_init__(self):
        if not self.lambda_mu <= 0.0 <= self.lambda_sigma:
            raise ValueError(
                f"need lambda_mu <= 0 <= lambda_sigma, got ({self.lambda_sigma}, {self.lambda_mu})"
            )
        if self.lambda_sigma == 0.0 and self.lambda_mu == 0.0:
            raise ValueError("risk weights cannot both be zero")

    def __iter__(self):
        yield self.lambda_sigma
        yield self.lambda_mu


VARIANCE_ONLY = RiskWeights(1.0, 0.0)


def paired_variance_reward(r, r_prime):
    """Half the squared difference of two independent draws from one arm.

    Its expectation is exactly the arm's variance.
    """
    d = np.asarray(r) - r_prime if isinstance(r, (list, tuple)) else r - r_prime
    return 0.5 * d * d


def batch_stats(rewards, axis: int = -1):
    """Empirical mean and Bessel-corrected variance of a reward batch.

    Works along ``axis`` so a stack of batches can be reduced at once.

    Returns
    -------
    mean, variance : float or ndarray
    """
    rewards = np.asarray(rewards, dtype=float)
    n = rewards.shape[axis] if rewards.ndim else 0
    if n < 2:
        raise ValueError("batch too small for variance: need at least 2 rewards")
    mean = rewards.mean(axis=axis)
    if n == 2:
        # same value as the general formula; written so it is bit-identical to the paired reward
        first, second = np.moveaxis(rewards, axis, 0)
        var = paired_variance_reward(first, second)
    else:
        var = rewards.var(axis=axis, ddof=1)
    if np.ndim(mean) == 0:
        return float(mean), float(var)
    return mean, var


def composite_reward(stats, weights: RiskWeights):
    """Scalarise ``(mean, variance)`` as ``lambda_sigma * variance + lambda_mu * mean``."""
    mean, var = stats
    return weights.lambda_sigma * var + weights.lambda_mu * mean


class Baseline(NamedTuple):
    """Running baseline; ``count`` is the step index ``t`` it will be used at."""

    value: float = 0.0
    count: int = 1

    def update(self, reward: float) -> "Baseline":
        return update_baseline(self, reward)


def update_baseline(b: Baseline, reward: float) -> Baseline:
    t = b.count
    return Baseline(b.value + (reward - b.value) / (t + 1), t + 1)

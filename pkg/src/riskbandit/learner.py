"""Softmax policy-gradient learners for variance and mean-variance bandits.

Both learners minimise ``sum_a pi(a) * (lambda_sigma * var_a + lambda_mu * mean_a)``
by stochastic gradient descent on the softmax preferences.  The variance
learner builds its per-step reward from two draws of the chosen arm; the risk
learner uses the mean and unbiased variance of a mini-batch of ``batch_size``
draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .env import BanditInstance
from .estimators import (
    VARIANCE_ONLY,
    Baseline,
    RiskWeights,
    batch_stats,
    composite_reward,
    paired_variance_reward,
)
from .policy import Constant, LearningRateSchedule, _softmax_finite, rate, sample_arm, softmax

__all__ = [
    "ALGORITHMS",
    "DivergenceError",
    "LearnerConfig",
    "LearnerState",
    "StepOutcome",
    "PolicyGradientBandit",
    "gradient_estimate",
    "exact_gradient",
    "objective_value",
    "step_variance",
    "step_risk",
]

ALGORITHMS = ("variance", "risk")
DIVERGENCE_BOUND = 1e6


class DivergenceError(FloatingPointError):
    """Raised when a preference leaves the finite range ``|h| <= 1e6``."""


@dataclass(frozen=True)
class LearnerConfig:
    """Static settings of a learner.

    ``algorithm="variance"`` is the paired-draw variance minimiser and requires
    ``batch_size=2`` with weights ``(1, 0)``.  ``algorithm="risk"`` accepts any
    weights and any ``batch_size >= 2``.
    """

    k: int
    algorithm: str = "variance"
    weights: RiskWeights = VARIANCE_ONLY
    batch_size: int = 2
    schedule: LearningRateSchedule = field(default_factory=lambda: Constant(0.1))
    h_init: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"need k >= 2 arms, got {self.k}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.batch_size < 2:
            raise ValueError("batch too small for variance: need batch_size >= 2")
        if self.algorithm == "variance":
            if self.batch_size != 2:
                raise ValueError("variance mode requires batch=2")
            if tuple(self.weights) != (1.0, 0.0):
                raise ValueError("variance mode requires weights lambda_sigma=1, lambda_mu=0")
        if self.h_init is not None:
            h = tuple(float(x) for x in self.h_init)
            if len(h) != self.k or not np.all(np.isfinite(h)):
                raise ValueError(f"h_init must be {self.k} finite numbers")
            object.__setattr__(self, "h_init", h)

    def initial_preferences(self) -> np.ndarray:
        if self.h_init is None:
            return np.zeros(self.k)
        return np.array(self.h_init, dtype=float)


@dataclass(frozen=True)
class LearnerState:
    h: np.ndarray
    baseline: Baseline
    t: int


class StepOutcome(NamedTuple):
    chosen_arm: int
    composite_reward: float
    gradient_estimate: np.ndarray
    rewards_drawn: np.ndarray
    policy: np.ndarray


def gradient_estimate(composite, baseline_value, chosen, p) -> np.ndarray:
    """``g(a) = (composite - baseline) * (1{a == chosen} - p[a])``.

    Broadcasts over leading axes: with ``chosen`` and ``composite`` of shape
    ``(n,)`` and ``p`` of shape ``(k,)`` the result has shape ``(n, k)``.
    """
    p = np.asarray(p, dtype=float)
    if isinstance(chosen, (int, np.integer)) and not isinstance(composite, np.ndarray) and p.ndim == 1:
        advantage = float(composite) - baseline_value
        g = -advantage * p
        # bit-identical to advantage * (indicator - p), the batched branch below
        g[chosen] = advantage * (1.0 - p[chosen])
        return g
    chosen = np.asarray(chosen)
    advantage = np.asarray(composite, dtype=float) - baseline_value
    indicator = np.arange(p.shape[-1]) == chosen[..., None]
    return advantage[..., None] * (indicator - p)


def objective_value(p, env: BanditInstance, weights: RiskWeights = VARIANCE_ONLY) -> float:
    """Expected per-step risk ``sum_a p[a] * q_a`` under policy ``p``."""
    return float(np.dot(p, env.risk_values(*weights)))


def exact_gradient(p, env: BanditInstance, weights: RiskWeights = VARIANCE_ONLY) -> np.ndarray:
    """Gradient of the expected risk with respect to the preferences.

    Component ``a`` is ``p[a] * (q_a - sum_b p[b] q_b)``; computed from the
    instance's true moments.
    """
    p = np.asarray(p, dtype=float)
    q = env.risk_values(*weights)
    return p * (q - np.dot(p, q))


class PolicyGradientBandit:
    """Stateful learner; one instance per realisation.

    >>> from riskbandit.env import instance_toy2
    >>> learner = PolicyGradientBandit(LearnerConfig(k=2, schedule=Constant(0.5)))
    >>> rng = np.random.default_rng(0)
    >>> out = learner.step(instance_toy2(), rng)
    >>> learner.t
    2
    """

    def __init__(self, config: LearnerConfig):
        self.config = config
        self.reset()

    def reset(self) -> None:
        self.h = self.config.initial_preferences()
        self.baseline = Baseline()
        self.t = 1

    @property
    def state(self) -> LearnerState:
        return LearnerState(self.h.copy(), self.baseline, self.t)

    @property
    def policy(self) -> np.ndarray:
        return softmax(self.h)

    def composite(self, rewards: np.ndarray) -> float:
        if self.config.algorithm == "variance":
            return float(paired_variance_reward(rewards[0], rewards[1]))
        return float(composite_reward(batch_stats(rewards), self.config.weights))

    def draw(
        self, env: BanditInstance, rng: np.random.Generator, baseline_value: float | None = None
    ) -> StepOutcome:
        """Sample an arm and a reward batch and form the gradient estimate.

        Leaves the learner untouched.  ``baseline_value`` overrides the
        running baseline, which is how the unbiasedness checks freeze it.
        """
        if env.k != self.config.k:
            raise ValueError(f"learner has {self.config.k} arms, instance has {env.k}")
        # self.h is kept finite by the divergence guard in step()
        p = _softmax_finite(self.h)
        arm = sample_arm(p, rng)
        rewards = env.arms[arm].sample(rng, self.config.batch_size)
        reward = self.composite(rewards)
        b = self.baseline.value if baseline_value is None else baseline_value
        g = gradient_estimate(reward, b, arm, p)
        return StepOutcome(arm, reward, g, rewards, p)

    def step(self, env: BanditInstance, rng: np.random.Generator) -> StepOutcome:
        """One learning step: descend along the estimate, then fold the reward into the baseline."""
        out = self.draw(env, rng)
        h = self.h - rate(self.config.schedule, self.t) * out.gradient_estimate
        if not np.abs(h).max() <= DIVERGENCE_BOUND:
            raise DivergenceError(f"divergence: preferences left the finite range at t={self.t}")
        self.h = h
        self.baseline = self.baseline.update(out.composite_reward)
        self.t += 1
        return out


def _check_algorithm(learner: PolicyGradientBandit, algorithm: str) -> None:
    if learner.config.algorithm != algorithm:
        raise ValueError(f"expected a {algorithm!r} learner, got {learner.config.algorithm!r}")


def step_variance(learner: PolicyGradientBandit, env: BanditInstance, rng) -> StepOutcome:
    _check_algorithm(learner, "variance")
    return learner.step(env, rng)


def step_risk(learner: PolicyGradientBandit, env: BanditInstance, rng) -> StepOutcome:
    _check_algorithm(learner, "risk")
    return learner.step(env, rng)

"""Softmax policy over a preference vector, arm sampling and step-size schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

__all__ = [
    "softmax",
    "sample_arm",
    "softmax_jacobian_row",
    "softmax_jacobian",
    "Constant",
    "PowerDecay",
    "LearningRateSchedule",
    "rate",
    "schedule_from_dict",
]


def softmax(h) -> np.ndarray:
    """Map preferences to arm probabilities.

    The maximum preference is subtracted before exponentiating, which leaves
    the result unchanged but keeps ``exp`` from overflowing.

    Raises
    ------
    ValueError
        If any preference is NaN or infinite.
    """
    h = np.asarray(h, dtype=float)
    if not np.isfinite(h).all():
        raise ValueError("invalid preferences: non-finite entry")
    return _softmax_finite(h)


def _softmax_finite(h: np.ndarray) -> np.ndarray:
    if h.ndim == 1:
        z = np.exp(h - h.max())
        z /= z.sum()
        return z
    z = np.exp(h - h.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def sample_arm(p, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of one arm index; consumes exactly one uniform."""
    cdf = np.asarray(p, dtype=float).cumsum()
    idx = int(cdf.searchsorted(rng.random() * cdf[-1], side="right"))
    return min(idx, len(cdf) - 1)


def softmax_jacobian_row(p, a: int) -> np.ndarray:
    """Derivative of ``softmax(h)[a]`` with respect to every ``h[b]``.

    Equal to ``p[a] * (1{b == a} - p[b])``.
    """
    p = np.asarray(p, dtype=float)
    row = -p[a] * p
    row[a] += p[a]
    return row


def softmax_jacobian(p) -> np.ndarray:
    """Full Jacobian ``J[a, b] = d softmax(h)[a] / d h[b]``."""
    p = np.asarray(p, dtype=float)
    return np.diag(p) - np.outer(p, p)


@dataclass(frozen=True)
class Constant:
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"learning rate must be positive, got {self.rho}")

    def __call__(self, t: int) -> float:
        return rate(self, t)


@dataclass(frozen=True)
class PowerDecay:
    """``rho0 / t**alpha``; ``alpha = 0`` is a constant rate."""

    rho0: float
    alpha: float

    def __post_init__(self):
        if not self.rho0 > 0 or self.alpha < 0:
            raise ValueError(f"need rho0 > 0 and alpha >= 0, got ({self.rho0}, {self.alpha})")

    def __call__(self, t: int) -> float:
        return rate(self, t)


LearningRateSchedule = Union[Constant, PowerDecay]


def rate(schedule: LearningRateSchedule, t: int) -> float:
    if t < 1:
        raise ValueError(f"steps are counted from 1, got t={t}")
    if isinstance(schedule, Constant):
        return float(schedule.rho)
    if isinstance(schedule, PowerDecay):
        return float(schedule.rho0) / math.pow(t, schedule.alpha)
    raise TypeError(f"unsupported schedule {schedule!r}")


def schedule_from_dict(data: dict[str, Any]) -> LearningRateSchedule:
    if "alpha" in data:
        return PowerDecay(float(data["rho0"]), float(data["alpha"]))
    return Constant(float(data["rho"]))

"""Monte Carlo harness: many seeded realisations, regret and optimal-arm curves.

Every realisation draws from its own stream
``numpy.random.default_rng([base_seed, run_index])``, so a run's trajectory
depends only on the config and its index. Runs can execute in any order or
in parallel and still give bit-identical aggregates.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np

from .env import INSTANCE_NAMES, BanditInstance, named_instance
from .estimators import RiskWeights
from .learner import DivergenceError, LearnerConfig, PolicyGradientBandit
from .policy import Constant, schedule_from_dict

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "AggregateCurves",
    "instantaneous_regret",
    "run_stream",
    "run_one",
    "run_experiment",
    "aggregate",
    "FIGURES",
    "figure_config",
    "reproduce_figure",
    "write_results",
    "CSV_HEADER",
]

CSV_HEADER = ("t", "mean_regret", "regret_ci_lo", "regret_ci_hi", "opt_freq", "opt_ci_lo", "opt_ci_hi")
Z_95 = 1.96
SEED_MIXING = "numpy.random.default_rng([base_seed, run_index])"


@dataclass(frozen=True)
class ExperimentConfig:
    """``instance`` is a registered name (toy2, toy10, random_hard) or an explicit instance."""

    instance: Union[str, BanditInstance]
    learner: LearnerConfig
    steps: int
    runs: int
    base_seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.runs < 1:
            raise ValueError(f"need steps >= 1 and runs >= 1, got ({self.steps}, {self.runs})")
        if isinstance(self.instance, str):
            if self.instance not in INSTANCE_NAMES:
                raise ValueError(f"unknown instance {self.instance!r}; expected one of {INSTANCE_NAMES}")
            k = 2 if self.instance == "toy2" else 10
        else:
            k = self.instance.k
        if k != self.learner.k:
            raise ValueError(f"learner is configured for {self.learner.k} arms, instance has {k}")

    def to_dict(self) -> dict[str, Any]:
        lc = self.learner
        schedule = (
            {"rho": lc.schedule.rho}
            if isinstance(lc.schedule, Constant)
            else {"rho0": lc.schedule.rho0, "alpha": lc.schedule.alpha}
        )
        return {
            "instance": self.instance if isinstance(self.instance, str) else self.instance.to_dict(),
            "algorithm": lc.algorithm,
            "lambda_sigma": lc.weights.lambda_sigma,
            "lambda_mu": lc.weights.lambda_mu,
            "batch": lc.batch_size,
            "schedule": schedule,
            "h_init": list(lc.h_init) if lc.h_init is not None else None,
            "steps": self.steps,
            "runs": self.runs,
            "seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        inst = data["instance"]
        instance = inst if isinstance(inst, str) else BanditInstance.from_dict(inst)
        k = {"toy2": 2}.get(inst, 10) if isinstance(inst, str) else instance.k
        learner = LearnerConfig(
            k=k,
            algorithm=data.get("algorithm", "variance"),
            weights=RiskWeights(float(data.get("lambda_sigma", 1.0)), float(data.get("lambda_mu", 0.0))),
            batch_size=int(data.get("batch", 2)),
            schedule=schedule_from_dict(data["schedule"]),
            h_init=tuple(data["h_init"]) if data.get("h_init") is not None else None,
        )
        return cls(instance, learner, int(data["steps"]), int(data["runs"]), int(data.get("seed", 0)))


@dataclass
class RunRecord:
    """Per-step trajectory of one realisation.

    ``opt_prob[t]`` is the policy's mass on the optimal arm *before* step
    ``t + 1`` is taken; ``final_opt_prob`` is the mass after the last step.
    """

    run_index: int
    chosen_arm: np.ndarray
    regret: np.ndarray
    optimal: np.ndarray
    opt_prob: np.ndarray
    final_opt_prob: float = math.nan
    optimal_arm: int = -1
    failed: bool = False
    error: Optional[str] = None

    @property
    def steps(self) -> int:
        return len(self.regret)


@dataclass
class AggregateCurves:
    mean_regret: np.ndarray
    regret_ci_half_width: np.ndarray
    mean_opt_frequency: np.ndarray
    opt_ci_half_width: np.ndarray
    n_runs: int
    n_failed: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.mean_regret)

    def rows(self):
        for i in range(self.steps):
            m, hw = self.mean_regret[i], self.regret_ci_half_width[i]
            f, fw = self.mean_opt_frequency[i], self.opt_ci_half_width[i]
            yield (i + 1, m, m - hw, m + hw, f, f - fw, f + fw)

    def final_summary(self) -> dict[str, float]:
        return {
            "t": self.steps,
            "mean_regret": float(self.mean_regret[-1]),
            "regret_ci": float(self.regret_ci_half_width[-1]),
            "opt_freq": float(self.mean_opt_frequency[-1]),
            "opt_ci": float(self.opt_ci_half_width[-1]),
            "runs": self.n_runs,
            "failed": self.n_failed,
        }


def instantaneous_regret(env: BanditInstance, weights: RiskWeights, arms) -> np.ndarray:
    """``q[arm] - min_a q[a]`` from the true moments, for each chosen arm."""
    q = env.risk_values(*weights)
    return q[np.asarray(arms)] - q[env.optimal_arm(*weights)]


def run_stream(base_seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng([base_seed, run_index])


def _resolve_instance(config: ExperimentConfig, rng: np.random.Generator) -> BanditInstance:
    if isinstance(config.instance, BanditInstance):
        return config.instance
    return named_instance(config.instance, rng)


def run_one(config: ExperimentConfig, run_index: int) -> RunRecord:
    """Execute one realisation.

    For ``random_hard`` a fresh instance is drawn from the run's own stream
    before learning starts. A divergence is returned as a failed record
    rather than raised.
    """
    if not 0 <= run_index < config.runs:
        raise ValueError(f"run_index must lie in [0, {config.runs}), got {run_index}")
    rng = run_stream(config.base_seed, run_index)
    env = _resolve_instance(config, rng)
    weights = config.learner.weights
    best = env.optimal_arm(*weights)

    T = config.steps
    arms = np.full(T, -1, dtype=np.int64)
    opt_prob = np.full(T, math.nan)
    learner = PolicyGradientBandit(config.learner)
    record = RunRecord(run_index, arms, np.full(T, math.nan), np.zeros(T, bool), opt_prob, optimal_arm=best)
    try:
        for t in range(T):
            out = learner.step(env, rng)
            arms[t] = out.chosen_arm
            opt_prob[t] = out.policy[best]
    except DivergenceError as exc:
        record.failed, record.error = True, str(exc)
        logger.warning("run %d diverged: %s", run_index, exc)
        return record
    record.regret = instantaneous_regret(env, weights, arms)
    record.optimal = arms == best
    record.final_opt_prob = float(learner.policy[best])
    return record


def _run_chunk(config: ExperimentConfig, indices: Sequence[int]) -> list[RunRecord]:
    return [run_one(config, i) for i in indices]


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[RunRecord]:
    """All ``config.runs`` realisations, ordered by run index.

    ``workers > 1`` spreads contiguous chunks of runs over processes; the
    returned records are identical for every worker count.
    """
    indices = list(range(config.runs))
    if workers <= 1 or config.runs == 1:
        return _run_chunk(config, indices)
    chunks = [c.tolist() for c in np.array_split(indices, min(workers, config.runs) * 4) if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [config] * len(chunks), chunks))
    records = [r for part in parts for r in part]
    records.sort(key=lambda r: r.run_index)
    return records


def _mean_and_half_width(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and normal-approximation 95% half-widths ``1.96 s / sqrt(M)``."""
    m = samples.shape[0]
    mean = samples.mean(axis=0)
    if m == 1:
        return mean, np.zeros_like(mean)
    sd = samples.std(axis=0, ddof=1)
    return mean, Z_95 * sd / math.sqrt(m)


def aggregate(records: Sequence[RunRecord]) -> AggregateCurves:
    """Mean regret and optimal-arm frequency per step, with 95% half-widths.

    Failed runs are dropped from the curves and counted in ``n_failed``.
    """
    if not records:
        raise ValueError("cannot aggregate an empty list of runs")
    lengths = {r.steps for r in records}
    if len(lengths) != 1:
        raise ValueError(f"runs have differing lengths {sorted(lengths)}")
    ok = sorted((r for r in records if not r.failed), key=lambda r: r.run_index)
    if not ok:
        raise ValueError("every run failed; nothing to aggregate")
    regret = np.stack([r.regret for r in ok])
    optimal = np.stack([r.optimal for r in ok]).astype(float)
    mean_regret, regret_hw = _mean_and_half_width(regret)
    opt_freq, opt_hw = _mean_and_half_width(optimal)
    return AggregateCurves(mean_regret, regret_hw, opt_freq, opt_hw, len(ok), len(records) - len(ok))


FIGURES: dict[str, dict[str, Any]] = {
    "fig1": {"instance": "toy2", "rho": 0.5, "steps": 200, "runs": 1000},
    "fig2": {"instance": "toy10", "rho": 0.05, "steps": 300, "runs": 1000},
    "fig3_4": {"instance": "random_hard", "rho": 0.1, "steps": 2000, "runs": 1000},
}


def figure_config(name: str, seed: int = 0, runs: Optional[int] = None) -> ExperimentConfig:
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}; expected one of {sorted(FIGURES)}")
    fig = FIGURES[name]
    k = 2 if fig["instance"] == "toy2" else 10
    learner = LearnerConfig(k=k, algorithm="variance", schedule=Constant(fig["rho"]))
    return ExperimentConfig(fig["instance"], learner, fig["steps"], runs or fig["runs"], seed)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_results(curves: AggregateCurves, config: ExperimentConfig, out_dir, stem: str) -> Path:
    """Write ``<stem>.csv`` and the ``<stem>.meta.json`` sidecar; returns the CSV path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in curves.rows():
            writer.writerow([row[0], *(_fmt(v) for v in row[1:])])
    meta = {
        "config": config.to_dict(),
        "seed": config.base_seed,
        "seed_mixing": SEED_MIXING,
        "runs_completed": curves.n_runs,
        "failed_runs": curves.n_failed,
        "ci": "normal approximation, 1.96 * sample std (ddof=1) / sqrt(runs)",
        "regret": "q[chosen] - q[optimal], q = lambda_sigma * true variance + lambda_mu * true mean",
        **curves.metadata,
    }
    (out_dir / f"{stem}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path


def reproduce_figure(
    name: str, out_dir=None, seed: int = 0, workers: int = 1, runs: Optional[int] = None
) -> tuple[AggregateCurves, Optional[Path]]:
    """Run one of the stored figure configurations and optionally persist it."""
    config = figure_config(name, seed=seed, runs=runs)
    curves = aggregate(run_experiment(config, workers=workers))
    curves.metadata["figure"] = name
    path = write_results(curves, config, out_dir, name) if out_dir is not None else None
    return curves, path

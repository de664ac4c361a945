"""Softmax policy-gradient bandits that minimise variance or a mean-variance risk."""

from .env import (
    BanditInstance,
    Bernoulli,
    DiscreteFinite,
    Gaussian,
    TruncatedGaussian,
    Uniform,
    instance_random_hard,
    instance_toy2,
    instance_toy10,
)
from .estimators import Baseline, RiskWeights, batch_stats, composite_reward, paired_variance_reward
from .experiment import ExperimentConfig, aggregate, reproduce_figure, run_experiment, run_one
from .learner import (
    DivergenceError,
    LearnerConfig,
    PolicyGradientBandit,
    exact_gradient,
    gradient_estimate,
    objective_value,
)
from .policy import Constant, PowerDecay, sample_arm, softmax, softmax_jacobian_row

__version__ = "0.1.0"

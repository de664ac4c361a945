import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskbandit.env import BanditInstance, DiscreteFinite, Gaussian, instance_toy2, instance_toy10
from riskbandit.estimators import Baseline, RiskWeights
from riskbandit.experiment import ExperimentConfig, aggregate, run_experiment
from riskbandit.learner import (
    DivergenceError,
    LearnerConfig,
    PolicyGradientBandit,
    exact_gradient,
    gradient_estimate,
    objective_value,
    step_risk,
    step_variance,
)
from riskbandit.policy import Constant, PowerDecay, rate, softmax


def point_mass(value):
    return DiscreteFinite((float(value),), (1.0,))


def fd_gradient(h, env, weights, eps=1e-6):
    """Central differences of the expected risk, independent of the closed form."""
    h = np.asarray(h, dtype=float)
    out = np.empty_like(h)
    for b in range(h.size):
        e = np.zeros_like(h)
        e[b] = eps
        out[b] = (objective_value(softmax(h + e), env, weights) - objective_value(softmax(h - e), env, weights)) / (2 * eps)
    return out


# ---------------------------------------------------------------- gradient estimate


def test_gradient_estimate_values():
    np.testing.assert_array_equal(gradient_estimate(2.0, 0.0, 0, np.array([0.5, 0.5])), [1.0, -1.0])
    np.testing.assert_array_equal(gradient_estimate(1.7, 1.7, 1, np.array([0.2, 0.8])), [0.0, 0.0])


def test_gradient_estimate_batched():
    p = np.array([0.2, 0.3, 0.5])
    composite = np.array([1.0, -2.0])
    chosen = np.array([2, 0])
    g = gradient_estimate(composite, 0.5, chosen, p)
    assert g.shape == (2, 3)
    for i in range(2):
        np.testing.assert_allclose(g[i], gradient_estimate(float(composite[i]), 0.5, int(chosen[i]), p))


@given(
    st.integers(2, 10).flatmap(
        lambda k: st.tuples(
            st.lists(st.floats(-20, 20), min_size=k, max_size=k),
            st.integers(0, k - 1),
            st.floats(-1e3, 1e3),
            st.floats(-1e3, 1e3),
        )
    )
)
def test_gradient_estimate_sums_to_zero(args):
    h, chosen, composite, baseline = args
    g = gradient_estimate(composite, baseline, chosen, softmax(h))
    assert abs(g.sum()) <= 1e-12 * max(1.0, abs(composite - baseline))


# ---------------------------------------------------------------- exact gradient / objective


def test_objective_values():
    assert objective_value([0.5, 0.5], instance_toy2()) == 2.5
    assert objective_value([1.0, 0.0], instance_toy2()) == 1.0
    assert objective_value(np.full(10, 0.1), instance_toy10()) == pytest.approx(3.7, abs=1e-14)


def test_exact_gradient_toy2_uniform():
    env = instance_toy2()
    g = exact_gradient([0.5, 0.5], env, RiskWeights(1.0, 0.0))
    np.testing.assert_allclose(g, [-0.75, 0.75], atol=1e-15)
    np.testing.assert_allclose(fd_gradient([0.0, 0.0], env, RiskWeights(1.0, 0.0)), [-0.75, 0.75], atol=1e-8)


@pytest.mark.parametrize("weights", [RiskWeights(1.0, 0.0), RiskWeights(1.0, -1.0), RiskWeights(0.5, -2.0)])
def test_exact_gradient_matches_finite_differences(weights):
    rng = np.random.default_rng(8)
    env = BanditInstance(tuple(Gaussian(rng.normal(), rng.uniform(0.5, 2)) for _ in range(6)))
    for _ in range(20):
        h = rng.normal(0, 1.5, 6)
        np.testing.assert_allclose(exact_gradient(softmax(h), env, weights), fd_gradient(h, env, weights), atol=1e-8)


def test_exact_gradient_vanishes_at_vertices_and_flat_objectives():
    np.testing.assert_allclose(exact_gradient([1.0] + [0.0] * 9, instance_toy10()), np.zeros(10), atol=1e-12)
    flat = BanditInstance((Gaussian(0, 2), Gaussian(0, 2), Gaussian(0, 2)))
    np.testing.assert_allclose(exact_gradient([0.2, 0.3, 0.5], flat), np.zeros(3), atol=1e-15)


# ---------------------------------------------------------------- config


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(k=1),
        dict(k=2, algorithm="sarsa"),
        dict(k=2, batch_size=5),
        dict(k=2, weights=RiskWeights(1.0, -1.0)),
        dict(k=2, algorithm="risk", batch_size=1),
        dict(k=2, h_init=(0.0,)),
        dict(k=2, h_init=(0.0, float("nan"))),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        LearnerConfig(**kwargs)


def test_variance_mode_message():
    with pytest.raises(ValueError, match="variance mode requires batch=2"):
        LearnerConfig(k=2, batch_size=4)


def test_step_helpers_check_algorithm(rng):
    learner = PolicyGradientBandit(LearnerConfig(k=2))
    with pytest.raises(ValueError):
        step_risk(learner, instance_toy2(), rng)
    step_variance(learner, instance_toy2(), rng)
    assert learner.t == 2


def test_arm_count_mismatch(rng):
    with pytest.raises(ValueError):
        PolicyGradientBandit(LearnerConfig(k=10)).step(instance_toy2(), rng)


# ---------------------------------------------------------------- stepping


def test_zero_variance_arms_never_move(rng):
    env = BanditInstance((point_mass(1.0), point_mass(-2.0), point_mass(3.0)))
    learner = PolicyGradientBandit(LearnerConfig(k=3, schedule=Constant(0.5)))
    for _ in range(200):
        out = learner.step(env, rng)
        assert out.composite_reward == 0.0
        np.testing.assert_array_equal(out.gradient_estimate, 0.0)
    np.testing.assert_array_equal(learner.h, 0.0)
    assert learner.baseline == Baseline(0.0, 201)
    assert learner.t == 201


@pytest.mark.parametrize("schedule", [Constant(0.5), PowerDecay(1.0, 0.6)])
def test_step_matches_hand_replay(schedule):
    """Estimate with the old baseline, descend, then update the baseline."""
    env = instance_toy10()
    learner = PolicyGradientBandit(LearnerConfig(k=10, schedule=schedule, h_init=tuple(np.linspace(-1, 1, 10))))
    rng_a, rng_b = np.random.default_rng(4), np.random.default_rng(4)
    h, b = learner.h.copy(), 0.0
    for t in range(1, 51):
        out = learner.step(env, rng_a)

        p = softmax(h)
        u = rng_b.random()
        arm = int(np.searchsorted(np.cumsum(p), u * np.cumsum(p)[-1], side="right"))
        r = rng_b.normal(env.arms[arm].mu, env.arms[arm].std, 2)
        reward = 0.5 * (r[0] - r[1]) ** 2
        g = (reward - b) * ((np.arange(10) == arm) - p)
        h = h - rate(schedule, t) * g
        b = b + (reward - b) / (t + 1)

        assert out.chosen_arm == arm
        assert out.composite_reward == reward
        np.testing.assert_array_equal(out.gradient_estimate, g)
        np.testing.assert_array_equal(learner.h, h)
        assert learner.baseline.value == b
        assert abs(out.gradient_estimate.sum()) <= 1e-12 * max(1.0, abs(reward - b))


def test_risk_mode_with_pair_batch_couples_to_variance_mode():
    env = instance_toy10()
    var = PolicyGradientBandit(LearnerConfig(k=10, schedule=Constant(0.2)))
    risk = PolicyGradientBandit(
        LearnerConfig(k=10, algorithm="risk", weights=RiskWeights(1.0, 0.0), batch_size=2, schedule=Constant(0.2))
    )
    rng_a, rng_b = np.random.default_rng(12), np.random.default_rng(12)
    for _ in range(500):
        a, b = var.step(env, rng_a), step_risk(risk, env, rng_b)
        assert a.chosen_arm == b.chosen_arm
        assert a.composite_reward == b.composite_reward
        np.testing.assert_array_equal(a.gradient_estimate, b.gradient_estimate)
    np.testing.assert_array_equal(var.h, risk.h)
    assert var.baseline == risk.baseline


def test_pure_mean_objective_finds_best_mean_arm():
    env = BanditInstance((point_mass(0.0), point_mass(1.0)))
    config = LearnerConfig(k=2, algorithm="risk", weights=RiskWeights(0.0, -1.0), batch_size=2, schedule=Constant(0.1))
    finals = []
    for seed in range(50):
        learner, rng = PolicyGradientBandit(config), np.random.default_rng(seed)
        for _ in range(500):
            out = learner.step(env, rng)
            assert abs(out.gradient_estimate.sum()) <= 1e-12
        finals.append(learner.policy[1])
    assert min(finals) > 0.9


def test_risk_mode_gradient_sums_to_zero(rng):
    config = LearnerConfig(k=10, algorithm="risk", weights=RiskWeights(1.0, -1.0), batch_size=5, schedule=Constant(0.1))
    learner = PolicyGradientBandit(config)
    for _ in range(300):
        out = learner.step(instance_toy10(), rng)
        assert out.rewards_drawn.shape == (5,)
        assert abs(out.gradient_estimate.sum()) <= 1e-12 * max(1.0, abs(out.composite_reward) + 10)
        assert np.all(np.isfinite(learner.h))


def test_divergence_guard(rng):
    env = BanditInstance((Gaussian(0.0, 1e4), Gaussian(0.0, 2e4)))
    learner = PolicyGradientBandit(LearnerConfig(k=2, schedule=Constant(1e3)))
    with pytest.raises(DivergenceError, match="divergence"):
        for _ in range(100):
            learner.step(env, rng)


def test_draw_does_not_mutate(rng):
    learner = PolicyGradientBandit(LearnerConfig(k=2, schedule=Constant(0.5)))
    before = learner.state
    learner.draw(instance_toy2(), rng, baseline_value=3.0)
    after = learner.state
    np.testing.assert_array_equal(before.h, after.h)
    assert (before.baseline, before.t) == (after.baseline, after.t)


@pytest.mark.parametrize("baseline", [-10.0, 0.0, 10.0])
def test_learner_draw_is_unbiased(baseline):
    """The learner's own draw path, frozen, averages to the exact gradient."""
    env = instance_toy2()
    learner = PolicyGradientBandit(LearnerConfig(k=2, h_init=(0.4, -0.3)))
    rng = np.random.default_rng(77)
    n = 40_000
    g = np.array([learner.draw(env, rng, baseline_value=baseline).gradient_estimate for _ in range(n)])
    se = g.std(axis=0, ddof=1) / np.sqrt(n)
    exact = exact_gradient(learner.policy, env)
    assert np.all(np.abs(g.mean(axis=0) - exact) <= 4 * se)


def test_toy2_identifies_low_variance_arm():
    config = ExperimentConfig("toy2", LearnerConfig(k=2, schedule=Constant(0.5)), steps=200, runs=1000, base_seed=3)
    records = run_experiment(config)
    final = np.array([r.final_opt_prob for r in records])
    assert np.mean(final > 0.9) >= 0.95


def test_descent_on_average():
    """Run-averaged objective 4 - 3 p(arm 0) is non-increasing after step 20, up to CI overlap."""
    config = ExperimentConfig("toy2", LearnerConfig(k=2, schedule=Constant(0.05)), steps=200, runs=1000, base_seed=5)
    records = run_experiment(config)
    obj = 4.0 - 3.0 * np.stack([r.opt_prob for r in records])
    mean = obj.mean(axis=0)[20:]
    hw = 1.96 * obj.std(axis=0, ddof=1)[20:] / np.sqrt(len(records))
    rises = mean[None, :] - mean[:, None] - (hw[None, :] + hw[:, None])
    assert np.all(np.triu(rises, 1) <= 0.0)
    assert mean[-1] < mean[0]

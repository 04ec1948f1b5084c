import math

import numpy as np
import pytest

from rhodec.errors import ImpossibleObservation
from rhodec.filtering import (belief_from_history, belief_update,
                              belief_update_all, rho_reward, shannon_entropy)
from rhodec.mav import RADAR, build_mav_domain, state_index
from rhodec.model import RhoDecPomdp
import oracles
from support import random_belief, random_model


def identity_uniform_model():
    """Identity transition, observation model uniform over both symbols."""
    return RhoDecPomdp(
        states=["s0", "s1", "s2"],
        actions_per_agent=[["a"]],
        observations_per_agent=[["z0", "z1"]],
        transition=np.stack([np.eye(3)], axis=1),
        observation=np.full((3, 1, 2), 0.5),
        state_reward=np.zeros((3, 1)),
        initial_belief=[0.2, 0.3, 0.5])


def deterministic_obs_model():
    """Two states emitting unique observations; hand-checkable posterior."""
    transition = np.array([[[0.7, 0.3]], [[0.4, 0.6]]])
    observation = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
    return RhoDecPomdp(
        states=["s0", "s1"], actions_per_agent=[["a"]],
        observations_per_agent=[["z0", "z1"]],
        transition=transition, observation=observation,
        state_reward=np.zeros((2, 1)), initial_belief=[0.5, 0.5])


def test_identity_uniform_update_returns_prior():
    model = identity_uniform_model()
    result = belief_update(model, model.initial_belief, 0, 0)
    assert np.allclose(result.posterior, model.initial_belief, atol=1e-12)
    assert result.normalizer == pytest.approx(0.5)


def test_deterministic_observation_posterior_hand_computed():
    # predicted mass: (0.5*0.7 + 0.5*0.4, 0.5*0.3 + 0.5*0.6) = (0.55, 0.45)
    model = deterministic_obs_model()
    result = belief_update(model, [0.5, 0.5], 0, 0)
    assert result.normalizer == pytest.approx(0.55, abs=1e-12)
    assert np.allclose(result.posterior, [1.0, 0.0], atol=1e-12)
    result = belief_update(model, [0.5, 0.5], 0, 1)
    assert result.normalizer == pytest.approx(0.45, abs=1e-12)
    assert np.allclose(result.posterior, [0.0, 1.0], atol=1e-12)


def test_zero_likelihood_observation_raises():
    model = identity_uniform_model()
    broken = RhoDecPomdp(
        states=model.states, actions_per_agent=model.actions_per_agent,
        observations_per_agent=model.observations_per_agent,
        transition=model.transition,
        observation=np.dstack([np.ones((3, 1)), np.zeros((3, 1))]),
        state_reward=model.state_reward, initial_belief=model.initial_belief)
    with pytest.raises(ImpossibleObservation):
        belief_update(broken, broken.initial_belief, 0, 1)


def test_update_matches_pure_python_oracle(rng):
    for _ in range(50):
        model = random_model(rng)
        b = random_belief(rng, model.n_states)
        a = int(rng.integers(model.n_joint_actions))
        z = int(rng.integers(model.n_joint_observations))
        eta, post = oracles.py_update(model, list(b), a, z)
        if post is None:
            with pytest.raises(ImpossibleObservation):
                belief_update(model, b, a, z)
        else:
            result = belief_update(model, b, a, z)
            assert result.normalizer == pytest.approx(eta, abs=1e-12)
            assert np.allclose(result.posterior, post, atol=1e-12)


def test_empty_history_returns_prior(mav_model):
    out = belief_from_history(mav_model, mav_model.initial_belief, [])
    assert np.array_equal(out, mav_model.initial_belief)


def test_single_step_history_equals_single_update(mav_model):
    action, observation = (0, 1), (2, 3)
    direct = belief_update(mav_model, mav_model.initial_belief,
                           action, observation).posterior
    folded = belief_from_history(mav_model, mav_model.initial_belief,
                                 [(action, observation)])
    assert np.allclose(folded, direct, atol=1e-15)


def test_two_step_history_composes_updates(mav_model):
    steps = [((1, 0), (0, 2)), ((1, 1), (3, 1))]
    b = mav_model.initial_belief
    for action, observation in steps:
        b = belief_update(mav_model, b, action, observation).posterior
    folded = belief_from_history(mav_model, mav_model.initial_belief, steps)
    assert np.max(np.abs(folded - b)) < 1e-12


def test_history_error_reports_step_index():
    model = identity_uniform_model()
    broken = RhoDecPomdp(
        states=model.states, actions_per_agent=model.actions_per_agent,
        observations_per_agent=model.observations_per_agent,
        transition=model.transition,
        observation=np.dstack([np.ones((3, 1)), np.zeros((3, 1))]),
        state_reward=model.state_reward, initial_belief=model.initial_belief)
    with pytest.raises(ImpossibleObservation) as info:
        belief_from_history(broken, broken.initial_belief, [((0,), (0,)), ((0,), (1,))])
    assert info.value.step == 1


def test_entropy_reference_points():
    assert shannon_entropy(np.full(8, 0.125)) == pytest.approx(3.0, abs=1e-12)
    assert shannon_entropy([0, 1.0, 0]) == 0.0
    assert shannon_entropy([0.5, 0.5, 0.0, 0.0]) == pytest.approx(1.0, abs=1e-12)


def test_entropy_bounds_and_concavity(rng):
    for _ in range(200):
        n = int(rng.integers(2, 9))
        b1, b2 = random_belief(rng, n), random_belief(rng, n)
        lam = float(rng.random())
        h1, h2 = shannon_entropy(b1), shannon_entropy(b2)
        assert 0.0 <= h1 <= math.log2(n) + 1e-12
        mix = lam * b1 + (1.0 - lam) * b2
        assert shannon_entropy(mix) >= lam * h1 + (1.0 - lam) * h2 - 1e-9


def test_rho_reward_pure_entropy_case():
    model = RhoDecPomdp(
        states=[f"s{i}" for i in range(8)],
        actions_per_agent=[["a"]], observations_per_agent=[["z"]],
        transition=np.stack([np.eye(8)], axis=1),
        observation=np.ones((8, 1, 1)),
        state_reward=np.zeros((8, 1)),
        alpha=1.0, uncertainty="shannon-entropy")
    assert rho_reward(model, np.full(8, 0.125), 0) == pytest.approx(-3.0)


def test_rho_reward_alpha_zero_is_expected_reward(rng):
    model = random_model(rng, alpha=0.0)
    b = random_belief(rng, model.n_states)
    for a in range(model.n_joint_actions):
        assert rho_reward(model, b, a) == pytest.approx(
            float(b @ model.state_reward[:, a]), abs=1e-12)


def test_rho_reward_uncertainty_none_ignores_alpha(rng):
    model = random_model(rng, alpha=5.0, uncertainty="none")
    b = random_belief(rng, model.n_states)
    assert rho_reward(model, b, 0) == pytest.approx(
        float(b @ model.state_reward[:, 0]), abs=1e-12)


def test_rho_reward_mav_degenerate_hostile_close():
    model = build_mav_domain()
    b = np.zeros(8)
    b[state_index(0, "hostile")] = 1.0
    value = rho_reward(model, b, (RADAR, RADAR))
    assert value == pytest.approx(-1.2, abs=1e-12)


def test_posterior_is_normalized_and_nonnegative(rng):
    for _ in range(300):
        model = random_model(rng, n_states=int(rng.integers(2, 6)))
        b = random_belief(rng, model.n_states)
        a = int(rng.integers(model.n_joint_actions))
        eta, posts = belief_update_all(model, b, a)
        assert eta.sum() == pytest.approx(1.0, abs=1e-9)
        for z in range(model.n_joint_observations):
            if eta[z] > 0:
                assert posts[z].sum() == pytest.approx(1.0, abs=1e-9)
                assert np.all(posts[z] >= 0.0)

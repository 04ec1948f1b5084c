"""Shared generators for randomized tests."""

import numpy as np

from rhodec.model import RhoDecPomdp
from rhodec.policy import JointPolicy, LocalPolicyTree


def random_model(rng, n_states=3, action_sizes=(2, 2), obs_sizes=(2, 2),
                 alpha=1.0, uncertainty="shannon-entropy", reward_scale=1.0):
    n_agents = len(action_sizes)
    n_actions = int(np.prod(action_sizes))
    n_obs = int(np.prod(obs_sizes))
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    observation = rng.dirichlet(np.ones(n_obs), size=(n_states, n_actions))
    reward = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    b0 = rng.dirichlet(np.ones(n_states))
    return RhoDecPomdp(
        states=[f"s{i}" for i in range(n_states)],
        actions_per_agent=[[f"a{i}{j}" for j in range(action_sizes[i])]
                           for i in range(n_agents)],
        observations_per_agent=[[f"z{i}{j}" for j in range(obs_sizes[i])]
                                for i in range(n_agents)],
        transition=transition, observation=observation, state_reward=reward,
        alpha=alpha, uncertainty=uncertainty, initial_belief=b0)


def random_instance(rng):
    """Small random instance in the acceptance-criterion family:
    2 agents, up to 3 states, binary actions/observations, horizon <= 3,
    alpha drawn from {0, 1}."""
    n_states = int(rng.integers(2, 4))
    horizon = int(rng.integers(1, 4))
    alpha = float(rng.integers(0, 2))
    model = random_model(rng, n_states=n_states, alpha=alpha)
    return model, horizon


def random_policy(model, horizon, rng):
    trees = []
    for i in range(model.n_agents):
        m = model.action_sizes[i]
        z = model.observation_sizes[i]
        levels = tuple(tuple(int(a) for a in rng.integers(0, m, size=z ** t))
                       for t in range(horizon))
        trees.append(LocalPolicyTree(m, z, levels))
    return JointPolicy(tuple(trees))


def random_belief(rng, n_states):
    return rng.dirichlet(np.ones(n_states))

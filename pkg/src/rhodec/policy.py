"""Histories, decision rules, deterministic joint policy trees, and exact
policy evaluation.

Decision rules are represented over *observation* histories rather than
full action-observation histories: for deterministic policies the past
actions are reconstructible from the policy itself, so the two
representations prescribe identical behavior while the per-agent policy
count drops from ``|A|^(sum_t (|A||Z|)^t)`` to ``|A|^(sum_t |Z|^t)``.
``count_local_policies`` reports both counts so the reduction stays
auditable.

A joint history is a sequence of (joint action, joint observation) steps,
each a per-agent component tuple. Helpers convert to per-agent local
histories.
"""

from collections import namedtuple
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import CombinatorialLimit, ImpossibleObservation
from .filtering import (belief_update, belief_update_all, rho_reward,
                        rho_reward_all)
from .model import RhoDecPomdp

# Default cap on the number of decision rules an enumeration may produce.
DEFAULT_RULE_CAP = 1_000_000


@dataclass(frozen=True)
class LocalPolicyTree:
    """One agent's depth-h policy tree.

    ``levels[t]`` assigns an action index to each of the ``n_observations**t``
    local observation sequences of length t, indexed lexicographically with
    the earliest observation most significant.
    """

    n_actions: int
    n_observations: int
    levels: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels",
                           tuple(tuple(int(a) for a in level) for level in self.levels))
        for t, level in enumerate(self.levels):
            if len(level) != self.n_observations ** t:
                raise ValueError(
                    f"level {t} has {len(level)} nodes, expected "
                    f"{self.n_observations ** t}")
            if any(not 0 <= a < self.n_actions for a in level):
                raise ValueError(f"level {t} holds an out-of-range action")

    @property
    def depth(self) -> int:
        return len(self.levels)

    def history_index(self, observations) -> int:
        idx = 0
        for z in observations:
            if not 0 <= z < self.n_observations:
                raise IndexError(f"observation index {z} out of range")
            idx = idx * self.n_observations + z
        return idx

    def action(self, t: int, observations) -> int:
        """Action prescribed at step t after the given local observation
        sequence (length t)."""
        return self.levels[t][self.history_index(observations)]

    def action_at(self, t: int, history_index: int) -> int:
        return self.levels[t][history_index]

    @classmethod
    def from_step_actions(cls, actions, n_actions, n_observations):
        """Open-loop tree: one action per step, identical on every branch."""
        levels = tuple(
            (int(a),) * (n_observations ** t) for t, a in enumerate(actions))
        return cls(n_actions, n_observations, levels)

    def extended(self, rule) -> "LocalPolicyTree":
        return LocalPolicyTree(self.n_actions, self.n_observations,
                               self.levels + (tuple(rule),))


@dataclass(frozen=True)
class JointPolicy:
    """A tuple of equal-depth local policy trees, one per agent.

    Depth below the planning horizon makes this a partial joint policy
    (the search objects of the solver)."""

    trees: tuple

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        depths = {tree.depth for tree in self.trees}
        if len(depths) > 1:
            raise ValueError("local trees must share the same depth")

    @property
    def depth(self) -> int:
        return self.trees[0].depth

    @property
    def n_agents(self) -> int:
        return len(self.trees)

    def joint_action(self, t: int, local_observations) -> tuple:
        """Per-agent action components at step t given each agent's local
        observation sequence."""
        return tuple(tree.action(t, obs)
                     for tree, obs in zip(self.trees, local_observations))

    def encoding(self) -> tuple:
        """Level-major nested tuple used for deterministic lexicographic
        tie-breaking: entry t is the joint decision rule appended at step t
        (agent-major within the level). A partial policy's encoding is a
        prefix of each of its completions' encodings."""
        return tuple(tuple(tree.levels[t] for tree in self.trees)
                     for t in range(self.depth))

    def extended(self, rules) -> "JointPolicy":
        """New policy with one decision rule appended per agent."""
        return JointPolicy(tuple(tree.extended(rule)
                                 for tree, rule in zip(self.trees, rules)))

    @classmethod
    def empty(cls, model: RhoDecPomdp) -> "JointPolicy":
        return cls(tuple(
            LocalPolicyTree(model.action_sizes[i], model.observation_sizes[i], ())
            for i in range(model.n_agents)))


# Alias kept for readability at call sites that deal with incomplete trees.
PartialJointPolicy = JointPolicy


PolicyCounts = namedtuple("PolicyCounts", ["full_history", "observation_tree"])


def count_local_policies(action_count: int, observation_count: int,
                         horizon: int) -> PolicyCounts:
    """Number of deterministic local policies for one agent, exactly.

    ``full_history``: decision rules mapping full action-observation
    histories to actions, ``|A| ** sum_t (|A||Z|)**t``.
    ``observation_tree``: behaviorally distinct observation-history trees,
    ``|A| ** sum_t |Z|**t``.
    """
    if min(action_count, observation_count, horizon) < 1:
        raise ValueError("all inputs must be >= 1")
    ao = action_count * observation_count
    full_exp = sum(ao ** t for t in range(horizon))
    tree_exp = sum(observation_count ** t for t in range(horizon))
    return PolicyCounts(action_count ** full_exp, action_count ** tree_exp)


def enumerate_decision_rules(n_actions: int, n_observations: int, depth: int,
                             cap: int = DEFAULT_RULE_CAP):
    """Iterator over every local decision rule at step ``depth``: all
    assignments of actions to the ``n_observations**depth`` observation
    sequences, in lexicographic order.

    Raises CombinatorialLimit (reporting the exact count) when the number
    of rules exceeds ``cap``.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    slots = n_observations ** depth
    count = n_actions ** slots
    if cap is not None and count > cap:
        raise CombinatorialLimit(count, cap)
    return product(range(n_actions), repeat=slots)


def local_histories(history):
    """Split a joint history into per-agent (action, observation) sequences."""
    if not history:
        return ()
    n = len(history[0][0])
    return tuple(
        tuple((step[0][i], step[1][i]) for step in history) for i in range(n))


def history_probability(model: RhoDecPomdp, policy: JointPolicy, history) -> float:
    """Probability of experiencing a joint history under a policy from the
    model's initial belief.

    Zero when any action in the history deviates from what the policy
    prescribes for the preceding observations; otherwise the product of
    the filtering normalizers along the history.
    """
    if len(history) > policy.depth:
        raise ValueError("history longer than policy depth")
    b = model.initial_belief
    local_obs = [[] for _ in range(model.n_agents)]
    prob = 1.0
    for t, (action, observation) in enumerate(history):
        action = tuple(action)
        prescribed = policy.joint_action(t, local_obs)
        if action != prescribed:
            return 0.0
        try:
            result = belief_update(model, b, action, observation)
        except ImpossibleObservation:
            return 0.0
        prob *= result.normalizer
        b = result.posterior
        for i, z in enumerate(observation):
            local_obs[i].append(z)
    return prob


@dataclass(frozen=True)
class EvalLeaf:
    """One reachable branch of a partial-policy evaluation: its probability,
    the belief it induces, and each agent's local observation sequence."""

    probability: float
    belief: np.ndarray
    local_observations: tuple


def _traverse(model, policy, depth, collect_leaves):
    component_table = model.observation_component_table
    leaves = [] if collect_leaves else None
    total = 0.0

    def recurse(belief, prob, t, local_obs):
        nonlocal total
        if t == depth:
            if collect_leaves:
                leaves.append(EvalLeaf(prob, belief, local_obs))
            return
        action = tuple(tree.action(t, obs)
                       for tree, obs in zip(policy.trees, local_obs))
        a_flat = model.joint_action_index(action)
        total += prob * rho_reward(model, belief, a_flat)
        eta, posteriors = belief_update_all(model, belief, a_flat)
        for z in range(eta.shape[0]):
            if eta[z] <= 0.0:
                continue
            components = component_table[z]
            extended = tuple(obs + (int(components[i]),)
                             for i, obs in enumerate(local_obs))
            recurse(posteriors[z], prob * eta[z], t + 1, extended)

    recurse(model.initial_belief, 1.0, 0, ((),) * model.n_agents)
    return total, leaves


def policy_value(model: RhoDecPomdp, policy: JointPolicy, horizon: int) -> float:
    """Exact value of a joint policy over the given horizon: the
    probability-weighted sum of rho rewards over every reachable joint
    observation branch. Zero-probability branches contribute nothing and
    are pruned during the traversal."""
    if policy.depth < horizon:
        raise ValueError("policy depth below requested horizon")
    value, _ = _traverse(model, policy, horizon, collect_leaves=False)
    return value


def evaluate_partial_policy(model: RhoDecPomdp, phi: JointPolicy):
    """Exact prefix value of a partial joint policy plus its evaluation
    frontier: every reachable (probability, belief) pair at the policy's
    depth, with the local observation sequences that lead there. Leaf
    probabilities sum to one."""
    value, leaves = _traverse(model, phi, phi.depth, collect_leaves=True)
    return value, leaves

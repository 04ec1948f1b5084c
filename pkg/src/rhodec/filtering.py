"""Discrete Bayes filtering over joint actions/observations and the
belief-dependent reward.

The filtering operator conditions a belief on one (joint action, joint
observation) pair; its normalizer is the prior probability of that
observation. The reward of a (belief, joint action) pair is the expected
state reward minus ``alpha`` times the uncertainty of the belief
(Shannon entropy in bits, or nothing for plain Dec-POMDPs).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ImpossibleObservation
from .model import Belief, RhoDecPomdp, UNCERTAINTY_SHANNON

# Entries this far below zero are treated as floating point noise and
# clamped before renormalizing.
_NEGATIVE_NOISE = -1e-12


@dataclass(frozen=True)
class FilterResult:
    posterior: Belief
    normalizer: float


def _flat_action(model, action) -> int:
    if isinstance(action, (int, np.integer)):
        return int(action)
    return model.joint_action_index(tuple(action))


def _flat_observation(model, observation) -> int:
    if isinstance(observation, (int, np.integer)):
        return int(observation)
    return model.joint_observation_index(tuple(observation))


def _clean_belief(b: np.ndarray) -> np.ndarray:
    """Clamp tiny negative noise to zero and renormalize."""
    if np.any(b < 0.0):
        if b.min() < _NEGATIVE_NOISE:
            raise ValueError(f"belief entry {b.min():.3g} below noise tolerance")
        b = np.where(b < 0.0, 0.0, b)
    total = b.sum()
    if total <= 0.0:
        raise ValueError("belief has no mass")
    return b / total


def belief_update(model: RhoDecPomdp, belief, action, observation) -> FilterResult:
    """One Bayes filtering step: predict through the transition table, weight
    by the observation likelihood, normalize.

    Raises ImpossibleObservation when the observation has zero prior
    probability under (belief, action); callers decide whether to prune
    or abort.
    """
    a = _flat_action(model, action)
    z = _flat_observation(model, observation)
    b = np.asarray(belief, dtype=float)
    predicted = b @ model.transition[:, a, :]
    unnormalized = model.observation[:, a, z] * predicted
    eta = float(unnormalized.sum())
    if eta <= 0.0:
        raise ImpossibleObservation(action, observation)
    return FilterResult(_clean_belief(unnormalized / eta), eta)


def belief_update_all(model: RhoDecPomdp, belief, action):
    """Vectorized filtering over every joint observation at once.

    Returns (eta, posteriors) with eta of shape (Z,) and posteriors of
    shape (Z, S); rows with eta == 0 are left as zeros.
    """
    a = _flat_action(model, action)
    b = np.asarray(belief, dtype=float)
    predicted = b @ model.transition[:, a, :]
    unnormalized = model.observation_by_action[a] * predicted[None, :]
    eta = unnormalized.sum(axis=1)
    posteriors = np.zeros_like(unnormalized)
    live = eta > 0.0
    posteriors[live] = unnormalized[live] / eta[live, None]
    np.clip(posteriors, 0.0, None, out=posteriors)
    return eta, posteriors


def belief_from_history(model: RhoDecPomdp, belief, history) -> Belief:
    """Fold the filtering operator over an alternating action/observation
    sequence. ``history`` is a sequence of (joint action, joint observation)
    steps, each item either a flat index or a per-agent component tuple.

    Propagates ImpossibleObservation with the failing step index attached.
    """
    b = np.asarray(belief, dtype=float)
    for k, (action, observation) in enumerate(history):
        try:
            b = belief_update(model, b, action, observation).posterior
        except ImpossibleObservation as exc:
            raise ImpossibleObservation(action, observation, step=k) from None
    return b


def shannon_entropy(belief) -> float:
    """Entropy of a belief in bits, with 0 log 0 taken as 0."""
    b = np.asarray(belief, dtype=float)
    positive = b[b > 0.0]
    return float(-(positive * np.log2(positive)).sum())


def entropy_rows(beliefs: np.ndarray) -> np.ndarray:
    """Row-wise entropy in bits of a (N, S) stack of beliefs."""
    b = np.asarray(beliefs, dtype=float)
    safe = np.where(b > 0.0, b, 1.0)
    return -(b * np.log2(safe)).sum(axis=-1)


def rho_reward(model: RhoDecPomdp, belief, action) -> float:
    """Belief-dependent reward: expected state reward minus alpha times the
    uncertainty of the belief. With uncertainty "none" only the expected
    state reward remains (the plain Dec-POMDP case)."""
    a = _flat_action(model, action)
    b = np.asarray(belief, dtype=float)
    value = float(b @ model.state_reward[:, a])
    if model.uncertainty == UNCERTAINTY_SHANNON:
        value -= model.alpha * shannon_entropy(b)
    return value


def rho_reward_all(model: RhoDecPomdp, belief) -> np.ndarray:
    """Vector of rho rewards over all joint actions for one belief."""
    b = np.asarray(belief, dtype=float)
    values = b @ model.state_reward
    if model.uncertainty == UNCERTAINTY_SHANNON:
        values = values - model.alpha * shannon_entropy(b)
    return values


def rho_reward_table(model: RhoDecPomdp, beliefs: np.ndarray) -> np.ndarray:
    """(N, A) table of rho rewards for a stack of beliefs."""
    b = np.asarray(beliefs, dtype=float)
    table = b @ model.state_reward
    if model.uncertainty == UNCERTAINTY_SHANNON:
        table = table - model.alpha * entropy_rows(b)[:, None]
    return table

"""Discrete multi-agent decision model with belief-dependent rewards.

The model is a finite cooperative partially observable decision process:
a shared hidden state, per-agent action and observation alphabets, joint
transition/observation tables, a state/action reward table, and an optional
uncertainty penalty (weight ``alpha``) applied to the joint belief. With
``alpha == 0`` and ``uncertainty == "none"`` it is a plain Dec-POMDP.

Tables are dense numpy arrays; the intended scale is desk-sized models
(tens of states). Joint action/observation indices are row-major with
agent 0 as the most significant digit; this ordering is part of the file
format contract in :mod:`rhodec.modelfile`.
"""

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

# A belief is a dense probability vector over states, kept as a 1-D float
# array. Helpers below validate and construct them.
Belief = np.ndarray

UNCERTAINTY_NONE = "none"
UNCERTAINTY_SHANNON = "shannon-entropy"
UNCERTAINTY_KINDS = (UNCERTAINTY_NONE, UNCERTAINTY_SHANNON)

# Tolerance for rows of stochastic tables (and beliefs) summing to one.
STOCHASTIC_ATOL = 1e-9


def flatten_index(components, sizes) -> int:
    """Row-major flat index of a per-agent index tuple (agent 0 most
    significant)."""
    flat = 0
    for c, m in zip(components, sizes):
        if not 0 <= c < m:
            raise IndexError(f"component {c} out of range for size {m}")
        flat = flat * m + c
    return flat


def unflatten_index(flat, sizes) -> tuple:
    """Inverse of :func:`flatten_index`."""
    out = []
    for m in reversed(sizes):
        out.append(flat % m)
        flat //= m
    if flat:
        raise IndexError("flat index out of range")
    return tuple(reversed(out))


def uniform_belief(n_states: int) -> Belief:
    return np.full(n_states, 1.0 / n_states)


def deterministic_belief(n_states: int, state: int) -> Belief:
    b = np.zeros(n_states)
    b[state] = 1.0
    return b


def is_valid_belief(b, n_states=None, atol=STOCHASTIC_ATOL) -> bool:
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or (n_states is not None and b.shape[0] != n_states):
        return False
    return bool(np.all(b >= 0.0) and abs(b.sum() - 1.0) <= atol)


def _frozen_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RhoDecPomdp:
    """Complete model: agents, spaces, tables, uncertainty penalty, prior.

    transition[s, a, s']   -- P(s' | s, joint action a)
    observation[s', a, z]  -- P(joint observation z | s', joint action a)
    state_reward[s, a]     -- immediate reward term independent of the belief
    """

    states: tuple
    actions_per_agent: tuple
    observations_per_agent: tuple
    transition: np.ndarray
    observation: np.ndarray
    state_reward: np.ndarray
    alpha: float = 0.0
    uncertainty: str = UNCERTAINTY_NONE
    initial_belief: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(
            self, "actions_per_agent",
            tuple(tuple(str(a) for a in acts) for acts in self.actions_per_agent))
        object.__setattr__(
            self, "observations_per_agent",
            tuple(tuple(str(z) for z in obs) for obs in self.observations_per_agent))
        if len(self.actions_per_agent) != len(self.observations_per_agent):
            raise ValueError("agent count mismatch between actions and observations")
        if not self.actions_per_agent:
            raise ValueError("need at least one agent")
        s, a, z = self.n_states, self.n_joint_actions, self.n_joint_observations
        object.__setattr__(self, "transition", _frozen_array(self.transition, (s, a, s)))
        object.__setattr__(self, "observation", _frozen_array(self.observation, (s, a, z)))
        object.__setattr__(self, "state_reward", _frozen_array(self.state_reward, (s, a)))
        if self.uncertainty not in UNCERTAINTY_KINDS:
            raise ValueError(f"unknown uncertainty kind {self.uncertainty!r}")
        b0 = self.initial_belief
        if b0 is None:
            b0 = uniform_belief(s)
        object.__setattr__(self, "initial_belief", _frozen_array(b0, (s,)))

    # -- sizes ---------------------------------------------------------

    @property
    def n_agents(self) -> int:
        return len(self.actions_per_agent)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @cached_property
    def action_sizes(self) -> tuple:
        return tuple(len(a) for a in self.actions_per_agent)

    @cached_property
    def observation_sizes(self) -> tuple:
        return tuple(len(z) for z in self.observations_per_agent)

    @cached_property
    def n_joint_actions(self) -> int:
        return int(np.prod(self.action_sizes))

    @cached_property
    def n_joint_observations(self) -> int:
        return int(np.prod(self.observation_sizes))

    # -- joint index conversions ---------------------------------------

    def joint_action_index(self, components) -> int:
        return flatten_index(components, self.action_sizes)

    def joint_action_components(self, flat: int) -> tuple:
        return unflatten_index(flat, self.action_sizes)

    def joint_observation_index(self, components) -> int:
        return flatten_index(components, self.observation_sizes)

    def joint_observation_components(self, flat: int) -> tuple:
        return unflatten_index(flat, self.observation_sizes)

    def joint_action_labels(self, flat: int) -> tuple:
        return tuple(self.actions_per_agent[i][c]
                     for i, c in enumerate(self.joint_action_components(flat)))

    def joint_observation_labels(self, flat: int) -> tuple:
        return tuple(self.observations_per_agent[i][c]
                     for i, c in enumerate(self.joint_observation_components(flat)))

    # -- derived tables used by the filtering/search hot paths ----------

    @cached_property
    def observation_by_action(self) -> np.ndarray:
        """observation transposed to [a, z, s'] (read-only view copy)."""
        arr = np.ascontiguousarray(self.observation.transpose(1, 2, 0))
        arr.setflags(write=False)
        return arr

    @cached_property
    def observation_component_table(self) -> np.ndarray:
        """(Z, n_agents) int array mapping flat joint observation to components."""
        table = np.empty((self.n_joint_observations, self.n_agents), dtype=np.int64)
        for z in range(self.n_joint_observations):
            table[z] = self.joint_observation_components(z)
        table.setflags(write=False)
        return table

    def with_initial_belief(self, belief) -> "RhoDecPomdp":
        """Copy of the model with a different starting belief."""
        return replace(self, initial_belief=np.asarray(belief, dtype=float))


@dataclass(frozen=True)
class Violation:
    """One validation finding: which table row is off and by how much."""

    table: str
    row: tuple
    residual: float
    message: str

    def __str__(self):
        return self.message


def _row_violations(name, rows, labels, atol):
    out = []
    sums = rows.sum(axis=-1)
    for idx in np.ndindex(sums.shape):
        row = rows[idx]
        residual = float(sums[idx] - 1.0)
        where = labels(idx)
        if abs(residual) > atol:
            out.append(Violation(name, where, residual,
                                 f"{name} row {where} sums to 1{residual:+.3g}"))
        if np.any(row < 0.0) or np.any(row > 1.0):
            bad = float(row.min() if row.min() < 0 else row.max())
            out.append(Violation(name, where, bad,
                                 f"{name} row {where} has entry {bad:.3g} outside [0, 1]"))
    return out


def validate_model(model: RhoDecPomdp, atol=STOCHASTIC_ATOL) -> list:
    """Check every invariant of the model; returns a list of violations
    (empty when the model is well formed). Violations are data, not errors."""
    out = []
    out += _row_violations(
        "transition", model.transition,
        lambda idx: (model.states[idx[0]], model.joint_action_labels(idx[1])),
        atol)
    out += _row_violations(
        "observation", model.observation,
        lambda idx: (model.states[idx[0]], model.joint_action_labels(idx[1])),
        atol)
    b0 = model.initial_belief
    res = float(b0.sum() - 1.0)
    if abs(res) > atol:
        out.append(Violation("initial_belief", (), res,
                             f"initial belief sums to 1{res:+.3g}"))
    if np.any(b0 < 0.0) or np.any(b0 > 1.0):
        out.append(Violation("initial_belief", (), float(b0.min()),
                             "initial belief has entries outside [0, 1]"))
    if model.alpha < 0.0:
        out.append(Violation("alpha", (), model.alpha,
                             f"alpha must be nonnegative, got {model.alpha}"))
    return out

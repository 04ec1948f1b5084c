"""Closed-loop episode execution with periodic communication, the prior
sweep over initial status beliefs, and batch statistics.

Execution alternates planning and decentralized acting: a joint policy is
planned from the current joint belief, each agent then follows its local
tree for ``comm_period`` steps seeing only its own observations, and at the
communication point the agents pool their local histories, the joint
belief is advanced through the pooled history, and planning repeats.
Per-step rewards are scored with the belief-dependent reward at the
reconstructed joint belief (filled in retroactively once the histories are
pooled, which yields the same numbers as online scoring would).
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientData
from .filtering import belief_update, rho_reward
from .mav import BASELINE_KINDS, MavDomainParams, build_mav_domain, make_baseline_policy
from .model import RhoDecPomdp
from .policy import policy_value
from .search import solve_maastar

CONTROLLER_KINDS = ("optimal",) + BASELINE_KINDS


@dataclass(frozen=True)
class EpisodeConfig:
    planning_horizon: int = 3
    comm_period: int = 3
    total_decisions: int = 51
    run_count: int = 50
    rng_seed: int = 0
    controller: str = "optimal"

    def __post_init__(self):
        if not 1 <= self.comm_period <= self.planning_horizon:
            raise ValueError("need 1 <= comm_period <= planning_horizon")
        if self.total_decisions < 1:
            raise ValueError("total_decisions must be >= 1")
        if self.controller not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller {self.controller!r}")


@dataclass(frozen=True)
class StepRecord:
    step: int
    state: int
    action: tuple
    observation: tuple
    reward: float
    cumulative: float


@dataclass(frozen=True)
class EpisodeTrace:
    records: tuple
    comm_beliefs: tuple

    @property
    def total_reward(self) -> float:
        return self.records[-1].cumulative if self.records else 0.0


class _SolveCache:
    """Memo for optimal plans keyed by the quantized planning belief."""

    def __init__(self, model, horizon):
        self.model = model
        self.horizon = horizon
        self.cache = {}

    def plan(self, belief):
        key = np.round(belief * 1e10).astype(np.int64).tobytes()
        policy = self.cache.get(key)
        if policy is None:
            policy = solve_maastar(self.model.with_initial_belief(belief),
                                   self.horizon).policy
            self.cache[key] = policy
        return policy


def _make_controller(model, config, shared_cache=None):
    kind = config.controller
    horizon = config.planning_horizon
    if kind == "optimal":
        cache = shared_cache if shared_cache is not None \
            else _SolveCache(model, horizon)

        def plan(belief, step, rng):
            return cache.plan(belief)
    elif kind == "random":
        def plan(belief, step, rng):
            return make_baseline_policy("random", horizon, rng=rng)
    else:
        def plan(belief, step, rng):
            return make_baseline_policy(kind, horizon, phase=step)
    return plan


def _sample(rng, pmf):
    return int(rng.choice(len(pmf), p=pmf))


def run_episode(model: RhoDecPomdp, config: EpisodeConfig, run_index: int = 0,
                _shared_cache=None) -> EpisodeTrace:
    """Simulate one episode of ``total_decisions`` steps.

    The environment draws states and observations from the model's tables
    with a generator seeded from ``rng_seed + run_index``. Between
    communication points each agent acts on its own observations only; the
    construction (local trees indexed by local observation sequences)
    enforces this.
    """
    rng = np.random.default_rng(config.rng_seed + run_index)
    plan = _make_controller(model, config, _shared_cache)

    state = _sample(rng, model.initial_belief)
    belief = model.initial_belief
    records = []
    comm_beliefs = [belief]
    cumulative = 0.0
    t = 0
    while t < config.total_decisions:
        policy = plan(belief, t, rng)
        steps = min(config.comm_period, config.total_decisions - t)
        local_obs = [[] for _ in range(model.n_agents)]
        cycle = []
        for k in range(steps):
            action = tuple(tree.action(k, local_obs[i])
                           for i, tree in enumerate(policy.trees))
            a_flat = model.joint_action_index(action)
            next_state = _sample(rng, model.transition[state, a_flat])
            z_flat = _sample(rng, model.observation[next_state, a_flat])
            observation = model.joint_observation_components(z_flat)
            for i, z in enumerate(observation):
                local_obs[i].append(z)
            cycle.append((state, action, observation))
            state = next_state
        # communication point: pool histories, rebuild beliefs, score rewards
        b = belief
        for k, (true_state, action, observation) in enumerate(cycle):
            reward = rho_reward(model, b, action)
            cumulative += reward
            records.append(StepRecord(t + k, true_state, action, observation,
                                      reward, cumulative))
            b = belief_update(model, b, action, observation).posterior
        belief = b
        comm_beliefs.append(belief)
        t += steps
    return EpisodeTrace(tuple(records), tuple(comm_beliefs))


def _batch_worker(payload):
    model, config, run_index = payload
    return run_episode(model, config, run_index)


def run_batch(model: RhoDecPomdp, config: EpisodeConfig, workers: int = 1) -> list:
    """All ``run_count`` episodes, in run order.

    Runs are independent (each owns a generator seeded by run index), so
    with ``workers > 1`` they execute in separate processes; results are
    collected in run order either way. Sequential batches share optimal
    plans through a per-batch cache (runs frequently replan from the same
    starting belief)."""
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        payloads = [(model, config, run_index)
                    for run_index in range(config.run_count)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_batch_worker, payloads))
    cache = _SolveCache(model, config.planning_horizon) \
        if config.controller == "optimal" else None
    return [run_episode(model, config, run_index, _shared_cache=cache)
            for run_index in range(config.run_count)]


def aggregate_stats(per_run_totals) -> tuple:
    """Mean and 95% confidence half-width (normal approximation,
    1.96 * s / sqrt(n) with the sample standard deviation)."""
    totals = np.asarray(list(per_run_totals), dtype=float)
    if totals.size < 2:
        raise InsufficientData(f"need >= 2 runs, got {totals.size}")
    mean = float(totals.mean())
    half_width = float(1.96 * totals.std(ddof=1) / np.sqrt(totals.size))
    return mean, half_width


SWEEP_POLICIES = ("cameras_only", "fixed_roles_1", "fixed_roles_2",
                  "turn_taking_1", "turn_taking_2")


@dataclass(frozen=True)
class SweepRow:
    prior_neutral: float
    policy: str
    value: float


def _sweep_point(payload):
    base, prior, horizon = payload
    model = build_mav_domain(replace(base, prior_neutral=float(prior)))
    rows = [SweepRow(float(prior), "optimal", solve_maastar(model, horizon).value)]
    for kind in SWEEP_POLICIES:
        baseline = make_baseline_policy(kind, horizon)
        rows.append(SweepRow(float(prior), kind,
                             policy_value(model, baseline, horizon)))
    return rows


def prior_sweep_evaluation(p_neutral_grid, horizon: int,
                           params: MavDomainParams = None,
                           workers: int = 1) -> list:
    """Exact values of the optimal policy and the five reference policies
    as the initial neutral-status probability varies. Grid points are
    independent; ``workers > 1`` evaluates them in separate processes with
    the row order preserved."""
    base = MavDomainParams() if params is None else params
    payloads = [(base, float(prior), horizon) for prior in p_neutral_grid]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_point, payloads))
    else:
        chunks = [_sweep_point(p) for p in payloads]
    return [row for chunk in chunks for row in chunk]

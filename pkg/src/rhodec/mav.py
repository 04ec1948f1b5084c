"""Two-observer target-tracking domain on a four-location line.

A target of unknown status (neutral or hostile) moves on locations l1..l4
spaced one unit apart; observer 1 sits at position 0 (on l1) and observer 2
at position 3 (on l4). Each observer picks a camera or a radar each step
and perceives a noisy location. Sensor noise grows exponentially with
distance; simultaneous radar use switches both sensors to degraded
interference parameters. Radar costs a little, and lighting up a nearby
hostile target costs a lot. The reward adds an entropy penalty on the
joint belief, so good policies both track the target and avoid risky or
conflicting sensor use.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import RhoDecPomdp, UNCERTAINTY_SHANNON
from .policy import JointPolicy, LocalPolicyTree

N_LOCATIONS = 4
LOCATION_LABELS = ("l1", "l2", "l3", "l4")
LOCATION_POSITIONS = (0.0, 1.0, 2.0, 3.0)
OBSERVER_POSITIONS = (0.0, 3.0)
ACTION_LABELS = ("camera", "radar")
CAMERA, RADAR = 0, 1
NEUTRAL, HOSTILE = "neutral", "hostile"

# Per (mode, status, interference) sensor parameters:
# (half-efficiency distance d0, nominal standard deviation sigma0).
DEFAULT_SENSOR_TABLE = {
    ("camera", NEUTRAL, False): (0.6, 0.3),
    ("camera", HOSTILE, False): (0.7, 0.75),
    ("radar", NEUTRAL, False): (1.0, 0.2),
    ("radar", HOSTILE, False): (1.0, 0.45),
    ("radar", NEUTRAL, True): (2.0, 1.0),
    ("radar", HOSTILE, True): (1.5, 1.2),
}

# Gaussian discretization clamps sigma below this to keep weights defined.
MIN_SIGMA = 1e-6

BASELINE_KINDS = ("cameras_only", "fixed_roles_1", "fixed_roles_2",
                  "turn_taking_1", "turn_taking_2", "random")


@dataclass(frozen=True)
class MavDomainParams:
    """Tunable constants of the domain; defaults give the reference setup."""

    p_stay_neutral: float = 0.85
    p_stay_hostile: float = 0.6
    sensor_table: dict = field(default_factory=lambda: dict(DEFAULT_SENSOR_TABLE))
    radar_cost: float = -0.1
    hostile_radar_penalty_d0: float = -1.0
    hostile_radar_penalty_d1: float = -0.1
    alpha: float = 1.0
    prior_neutral: float = 0.5

    def __post_init__(self):
        for p in (self.p_stay_neutral, self.p_stay_hostile, self.prior_neutral):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        for (mode, status, interference), (d0, sigma0) in self.sensor_table.items():
            if d0 <= 0 or sigma0 <= 0:
                raise ValueError(
                    f"sensor row {(mode, status, interference)} needs positive "
                    f"d0 and sigma0")


def sensor_sigma(mode: str, status: str, interference: bool, distance: float,
                 table=None) -> float:
    """Distance-dependent standard deviation: sigma0 doubles every d0 units.

    Interference rows exist only for the radar; a camera ignores the flag.
    """
    if distance < 0:
        raise ValueError("distance must be nonnegative")
    table = DEFAULT_SENSOR_TABLE if table is None else table
    d0, sigma0 = table[(mode, status, bool(interference) and mode == "radar")]
    return sigma0 * 2.0 ** (distance / d0)


def detection_distribution(observer_index: int, mode: str, interference: bool,
                           target_location: int, status: str,
                           table=None) -> np.ndarray:
    """Probability over the four perceived locations: a Gaussian centered on
    the target's position, evaluated at the location positions and
    normalized. The Gaussian's width comes from the observer's distance to
    the target."""
    positions = np.asarray(LOCATION_POSITIONS)
    target_pos = positions[target_location]
    distance = abs(OBSERVER_POSITIONS[observer_index] - target_pos)
    sigma = max(sensor_sigma(mode, status, interference, distance, table), MIN_SIGMA)
    weights = np.exp(-((positions - target_pos) ** 2) / (2.0 * sigma ** 2))
    return weights / weights.sum()


def _location_transition(p_stay: float) -> np.ndarray:
    """Random walk on the line: stay with p, else split evenly to the
    neighbors. Boundary locations fold the missing neighbor's share back
    into staying."""
    move = (1.0 - p_stay) / 2.0
    t = np.zeros((N_LOCATIONS, N_LOCATIONS))
    for loc in range(N_LOCATIONS):
        t[loc, loc] = p_stay
        for nb in (loc - 1, loc + 1):
            if 0 <= nb < N_LOCATIONS:
                t[loc, nb] = move
            else:
                t[loc, loc] += move
    return t


def state_label(location: int, status: str) -> str:
    return f"{LOCATION_LABELS[location]}-{status}"


def state_index(location: int, status: str) -> int:
    return location + (N_LOCATIONS if status == HOSTILE else 0)


def build_mav_domain(params: MavDomainParams = None) -> RhoDecPomdp:
    """Assemble the full model: 8 states (4 locations x 2 statuses), two
    agents with camera/radar actions and location observations, entropy
    penalty weight ``alpha``, and a belief uniform over locations with the
    configured neutral prior."""
    params = MavDomainParams() if params is None else params
    statuses = (NEUTRAL, HOSTILE)
    states = [state_label(loc, st) for st in statuses for loc in range(N_LOCATIONS)]
    n_states = len(states)
    actions = (ACTION_LABELS, ACTION_LABELS)
    observations = (LOCATION_LABELS, LOCATION_LABELS)
    joint_actions = [(a1, a2) for a1 in range(2) for a2 in range(2)]
    n_actions = len(joint_actions)
    n_obs = N_LOCATIONS * N_LOCATIONS

    transition = np.zeros((n_states, n_actions, n_states))
    walk = {NEUTRAL: _location_transition(params.p_stay_neutral),
            HOSTILE: _location_transition(params.p_stay_hostile)}
    for st in statuses:
        for loc in range(N_LOCATIONS):
            s = state_index(loc, st)
            for loc2 in range(N_LOCATIONS):
                transition[s, :, state_index(loc2, st)] = walk[st][loc, loc2]

    observation = np.zeros((n_states, n_actions, n_obs))
    for a_flat, (a1, a2) in enumerate(joint_actions):
        interference = (a1 == RADAR and a2 == RADAR)
        for st in statuses:
            for loc in range(N_LOCATIONS):
                s = state_index(loc, st)
                w1 = detection_distribution(0, ACTION_LABELS[a1], interference,
                                            loc, st, params.sensor_table)
                w2 = detection_distribution(1, ACTION_LABELS[a2], interference,
                                            loc, st, params.sensor_table)
                observation[s, a_flat, :] = np.outer(w1, w2).ravel()

    reward = np.zeros((n_states, n_actions))
    for a_flat, acts in enumerate(joint_actions):
        for st in statuses:
            for loc in range(N_LOCATIONS):
                s = state_index(loc, st)
                r = 0.0
                for agent, a in enumerate(acts):
                    if a != RADAR:
                        continue
                    r += params.radar_cost
                    if st == HOSTILE:
                        d = abs(OBSERVER_POSITIONS[agent] - LOCATION_POSITIONS[loc])
                        if d == 0:
                            r += params.hostile_radar_penalty_d0
                        elif d == 1:
                            r += params.hostile_radar_penalty_d1
                reward[s, a_flat] = r

    b0 = np.empty(n_states)
    b0[:N_LOCATIONS] = params.prior_neutral / N_LOCATIONS
    b0[N_LOCATIONS:] = (1.0 - params.prior_neutral) / N_LOCATIONS

    return RhoDecPomdp(
        states=states, actions_per_agent=actions,
        observations_per_agent=observations,
        transition=transition, observation=observation, state_reward=reward,
        alpha=params.alpha, uncertainty=UNCERTAINTY_SHANNON, initial_belief=b0)


def _step_pattern(kind: str, step: int) -> tuple:
    if kind == "cameras_only":
        return (CAMERA, CAMERA)
    if kind == "fixed_roles_1":
        return (CAMERA, RADAR)
    if kind == "fixed_roles_2":
        return (RADAR, CAMERA)
    if kind == "turn_taking_1":
        return (CAMERA, RADAR) if step % 2 == 0 else (RADAR, CAMERA)
    if kind == "turn_taking_2":
        return (RADAR, CAMERA) if step % 2 == 0 else (CAMERA, RADAR)
    raise ValueError(f"unknown baseline kind {kind!r}")


def make_baseline_policy(kind: str, horizon: int, seed=None, phase: int = 0,
                         rng=None) -> JointPolicy:
    """Reference policies: cameras only, the two fixed sensor assignments,
    the two alternating assignments, and uniform random actions.

    The deterministic kinds are open loop (observation independent).
    ``phase`` shifts the alternating patterns so that execution across
    consecutive planning cycles keeps alternating. ``random`` draws one
    independent uniform action per tree node from ``seed`` (or a caller
    supplied generator)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if kind == "random":
        if rng is None:
            rng = np.random.default_rng(seed)
        trees = []
        for _ in range(2):
            levels = tuple(
                tuple(rng.integers(0, 2, size=N_LOCATIONS ** t).tolist())
                for t in range(horizon))
            trees.append(LocalPolicyTree(2, N_LOCATIONS, levels))
        return JointPolicy(tuple(trees))
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}")
    steps = [_step_pattern(kind, phase + t) for t in range(horizon)]
    trees = tuple(
        LocalPolicyTree.from_step_actions([s[i] for s in steps], 2, N_LOCATIONS)
        for i in range(2))
    return JointPolicy(trees)

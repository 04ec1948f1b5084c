"""Independent reference implementations used as test oracles.

Everything here is written from the definitions, in plain Python where
possible, deliberately avoiding the library's code paths: the belief
filter works on lists, policy values come from explicit history
enumeration, the exhaustive optimum enumerates complete policy trees,
and the Kalman/geometry oracles use different formulations than the
package (matrix inverses, cdf quadrature, an independent sampler).
"""

import itertools
import math

import numpy as np


def _tables(model):
    S = model.n_states
    A = model.n_joint_actions
    Z = model.n_joint_observations
    T = [[list(model.transition[s, a]) for a in range(A)] for s in range(S)]
    O = [[list(model.observation[s, a]) for a in range(A)] for s in range(S)]
    R = [list(model.state_reward[s]) for s in range(S)]
    alpha = model.alpha if model.uncertainty == "shannon-entropy" else 0.0
    return S, A, Z, T, O, R, alpha


def py_entropy(b):
    h = 0.0
    for p in b:
        if p > 0.0:
            h -= p * math.log2(p)
    return h


def py_rho(model, b, a_flat):
    S, A, Z, T, O, R, alpha = _tables(model)
    r = sum(b[s] * R[s][a_flat] for s in range(S))
    if alpha:
        r -= alpha * py_entropy(b)
    return r


def py_update(model, b, a_flat, z_flat):
    """Returns (eta, posterior list or None when eta == 0)."""
    S, A, Z, T, O, R, alpha = _tables(model)
    pred = [sum(T[s][a_flat][s2] * b[s] for s in range(S)) for s2 in range(S)]
    u = [O[s2][a_flat][z_flat] * pred[s2] for s2 in range(S)]
    eta = sum(u)
    if eta <= 0.0:
        return 0.0, None
    return eta, [x / eta for x in u]


def _act_flat(actions, sizes):
    f = 0
    for c, m in zip(actions, sizes):
        f = f * m + c
    return f


def oracle_policy_value(model, policy, horizon):
    """Direct history enumeration: at every step, list all reachable joint
    histories with their chain-rule probabilities and accumulate the
    probability-weighted rewards."""
    S, A, Z, T, O, R, alpha = _tables(model)
    n = model.n_agents
    a_sizes = model.action_sizes
    zcomp = [model.joint_observation_components(z) for z in range(Z)]

    def rho(b, a):
        r = sum(b[s] * R[s][a] for s in range(S))
        return r - alpha * py_entropy(b) if alpha else r

    total = 0.0
    frontier = [(1.0, [float(x) for x in model.initial_belief],
                 tuple(() for _ in range(n)))]
    for t in range(horizon):
        nxt = []
        for prob, b, local in frontier:
            actions = tuple(policy.trees[i].action(t, local[i]) for i in range(n))
            a = _act_flat(actions, a_sizes)
            total += prob * rho(b, a)
            for z in range(Z):
                eta, post = py_update(model, b, a, z)
                if post is not None:
                    extended = tuple(local[i] + (zcomp[z][i],) for i in range(n))
                    nxt.append((prob * eta, post, extended))
        frontier = nxt
    return total


def brute_force_best_value(model, horizon):
    """Exhaustive optimum over every deterministic joint policy tree:
    stage-wise enumeration of all decision-rule choices, evaluating each
    complete assignment."""
    S, A, Z, T, O, R, alpha = _tables(model)
    n = model.n_agents
    a_sizes = model.action_sizes
    z_sizes = model.observation_sizes
    zcomp = [model.joint_observation_components(z) for z in range(Z)]

    def rho(b, a):
        r = sum(b[s] * R[s][a] for s in range(S))
        return r - alpha * py_entropy(b) if alpha else r

    def stage(frontier, t):
        if t == horizon:
            return 0.0
        slot_counts = [z_sizes[i] ** t for i in range(n)]
        rule_sets = [list(itertools.product(range(a_sizes[i]),
                                            repeat=slot_counts[i]))
                     for i in range(n)]
        last = t == horizon - 1
        rho_tab = [[rho(b, a) for a in range(A)] for _, b, _ in frontier]
        best = -math.inf
        for rules in itertools.product(*rule_sets):
            value = 0.0
            for li, (p, b, hists) in enumerate(frontier):
                a = _act_flat(tuple(rules[i][hists[i]] for i in range(n)), a_sizes)
                value += p * rho_tab[li][a]
            if not last:
                nxt = []
                for p, b, hists in frontier:
                    a = _act_flat(tuple(rules[i][hists[i]] for i in range(n)),
                                  a_sizes)
                    for z in range(Z):
                        eta, post = py_update(model, b, a, z)
                        if post is not None:
                            nh = tuple(hists[i] * z_sizes[i] + zcomp[z][i]
                                       for i in range(n))
                            nxt.append((p * eta, post, nh))
                value += stage(nxt, t + 1)
            best = max(best, value)
        return best

    start = [(1.0, [float(x) for x in model.initial_belief], (0,) * n)]
    return stage(start, 0)


def expectimax_value(model, horizon, belief=None):
    """Centralized belief-tree expectimax over joint actions/observations.
    For a single-agent model this is the exact optimal value."""
    S, A, Z, T, O, R, alpha = _tables(model)

    def rho(b, a):
        r = sum(b[s] * R[s][a] for s in range(S))
        return r - alpha * py_entropy(b) if alpha else r

    def v(b, k):
        if k == 0:
            return 0.0
        best = -math.inf
        for a in range(A):
            q = rho(b, a)
            for z in range(Z):
                eta, post = py_update(model, b, a, z)
                if post is not None:
                    q += eta * v(post, k - 1)
            best = max(best, q)
        return best

    b0 = [float(x) for x in (model.initial_belief if belief is None else belief)]
    return v(b0, horizon)


# ---------------------------------------------------------------------------
# continuous-side oracles


def textbook_kf_step(mean, covariance, measurement, dt, q_sigma, r_sigma):
    """Constant-velocity Kalman step written the textbook way (explicit
    matrix inverse in the gain)."""
    f = np.array([[1.0, 0.0, dt, 0.0],
                  [0.0, 1.0, 0.0, dt],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
    q = q_sigma ** 2 * np.array([
        [dt ** 4 / 4.0, 0.0, dt ** 3 / 2.0, 0.0],
        [0.0, dt ** 4 / 4.0, 0.0, dt ** 3 / 2.0],
        [dt ** 3 / 2.0, 0.0, dt ** 2, 0.0],
        [0.0, dt ** 3 / 2.0, 0.0, dt ** 2]])
    x = f @ np.asarray(mean, dtype=float)
    p = f @ np.asarray(covariance, dtype=float) @ f.T + q
    if measurement is not None:
        h = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
        s = h @ p @ h.T + r_sigma ** 2 * np.eye(2)
        k = p @ h.T @ np.linalg.inv(s)
        x = x + k @ (np.asarray(measurement, dtype=float) - h @ x)
        p = (np.eye(4) - k @ h) @ p
    return x, 0.5 * (p + p.T)


def gaussian_cell_masses(mean2, cov2, centers, cell_size):
    """Integrated (not point-evaluated) Gaussian mass per grid cell, via
    bivariate normal cdf rectangles, normalized over the grid."""
    from scipy.stats import multivariate_normal
    mvn = multivariate_normal(np.asarray(mean2, dtype=float),
                              np.asarray(cov2, dtype=float))
    half = cell_size / 2.0
    masses = []
    for cx, cy in centers:
        total = (mvn.cdf([cx + half, cy + half])
                 - mvn.cdf([cx + half, cy - half])
                 - mvn.cdf([cx - half, cy + half])
                 + mvn.cdf([cx - half, cy - half]))
        masses.append(max(float(total), 0.0))
    masses = np.array(masses)
    return masses / masses.sum()


def overlap_fraction_fine(position_a, range_a, direction_a, width_a,
                          position_b, range_b, direction_b, width_b,
                          samples=2_000_000, seed=991):
    """High-resolution Monte Carlo estimate of sector overlap with its own
    geometry code. Directions/widths in radians; returns
    area(intersection) / area(smaller sector)."""
    area_a = 0.5 * range_a ** 2 * width_a
    area_b = 0.5 * range_b ** 2 * width_b
    if area_b < area_a:
        position_a, range_a, direction_a, width_a, position_b, range_b, \
            direction_b, width_b = position_b, range_b, direction_b, width_b, \
            position_a, range_a, direction_a, width_a
    rng = np.random.default_rng(seed)
    u = rng.random(samples)
    theta = direction_a + (u - 0.5) * width_a
    r = range_a * np.sqrt(rng.random(samples))
    x = position_a[0] + r * np.cos(theta)
    y = position_a[1] + r * np.sin(theta)
    dx = x - position_b[0]
    dy = y - position_b[1]
    inside_range = np.hypot(dx, dy) <= range_b
    delta = np.arctan2(dy, dx) - direction_b
    delta = (delta + np.pi) % (2.0 * np.pi) - np.pi
    inside_angle = np.abs(delta) <= width_b / 2.0
    return float((inside_range & inside_angle).mean())

"""Optimal joint-policy search: best-first expansion of partial joint
policies with admissible heuristic completion bounds.

A search node is a partial joint policy, scored by its exactly evaluated
prefix value plus an upper bound on the best completion. Children append
one joint decision rule. At the final stage the best completing rule is
computed directly (an exhaustive optimization over last-step rules that
exploits the per-history decomposition of the last step), which avoids
materializing ``|A|^(|Z|^(h-1))`` child nodes while returning exactly the
same optimal policy and value.

The default completion bound is the exact full-communication relaxation:
an expectimax over joint actions and joint observations with the
belief-dependent reward at every node, memoized on quantized beliefs.
A looser fully-observable relaxation is available as ``heuristic="mdp"``.
"""

import heapq
import time
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import CombinatorialLimit, ResourceExhausted
from .filtering import rho_reward_all, rho_reward_table
from .model import RhoDecPomdp
from .policy import DEFAULT_RULE_CAP, JointPolicy, enumerate_decision_rules

# Nodes whose priority is at least this far below the incumbent are dropped.
PRUNE_SLACK = 1e-12

HEURISTIC_KINDS = ("pomdp", "mdp")


def _belief_key(belief):
    # Quantize mass to a 1e-12 grid so equal-up-to-noise beliefs share
    # memo entries.
    return np.round(belief * 1e12).astype(np.int64).tobytes()


class CentralizedPomdpBound:
    """Exact optimal value of the full-communication relaxation.

    value(b, k) = max over joint actions of rho(b, a) plus the
    observation-weighted values of the filtered beliefs, k steps to go.
    Every joint policy's completion value is bounded above by this, since
    a centralized controller can mimic any decentralized one.
    """

    def __init__(self, model: RhoDecPomdp):
        self.model = model
        self._memo = {}

    def value(self, belief, remaining: int) -> float:
        if remaining <= 0:
            return 0.0
        b = np.asarray(belief, dtype=float)
        key = (_belief_key(b), remaining)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        model = self.model
        rho = rho_reward_all(model, b)
        if remaining == 1:
            value = float(rho.max())
        else:
            pred = np.einsum("s,sap->ap", b, model.transition)
            unnorm = pred[:, None, :] * model.observation_by_action
            eta = unnorm.sum(axis=-1)
            live = eta > 0.0
            posts = np.divide(unnorm, eta[:, :, None],
                              out=np.zeros_like(unnorm), where=live[:, :, None])
            n_a, n_z, n_s = posts.shape
            if remaining == 2:
                inner = rho_reward_table(model, posts.reshape(-1, n_s)).max(axis=1)
                value = float((rho + (eta * inner.reshape(n_a, n_z)).sum(axis=1)).max())
            else:
                value = -np.inf
                for a in range(n_a):
                    q = rho[a]
                    for z in range(n_z):
                        if live[a, z]:
                            q += eta[a, z] * self.value(posts[a, z], remaining - 1)
                    value = max(value, q)
                value = float(value)
        self._memo[key] = value
        return value

    def one_step_rows(self, beliefs: np.ndarray) -> np.ndarray:
        """value(b, 1) for a stack of beliefs, vectorized."""
        return rho_reward_table(self.model, beliefs).max(axis=1)


class MdpBound:
    """Fully observable relaxation: optimal state values under the state
    reward only. Dominates the centralized relaxation because full
    observability can only help and the dropped uncertainty penalty is
    nonpositive."""

    def __init__(self, model: RhoDecPomdp):
        self.model = model
        self._values = [np.zeros(model.n_states)]

    def state_values(self, remaining: int) -> np.ndarray:
        while len(self._values) <= remaining:
            v = self._values[-1]
            q = self.model.state_reward + np.einsum("sap,p->sa", self.model.transition, v)
            self._values.append(q.max(axis=1))
        return self._values[remaining]

    def value(self, belief, remaining: int) -> float:
        if remaining <= 0:
            return 0.0
        return float(np.asarray(belief, dtype=float) @ self.state_values(remaining))

    def one_step_rows(self, beliefs: np.ndarray) -> np.ndarray:
        return np.asarray(beliefs, dtype=float) @ self.state_values(1)


def _leaf_pairs(leaves):
    for leaf in leaves:
        if hasattr(leaf, "probability"):
            yield float(leaf.probability), np.asarray(leaf.belief, dtype=float)
        else:
            p, b = leaf[0], leaf[1]
            yield float(p), np.asarray(b, dtype=float)


def centralized_pomdp_bound(model: RhoDecPomdp, leaves, remaining_steps: int) -> float:
    """Probability-weighted full-communication completion bound over an
    evaluation frontier. Admissible for the decentralized problem."""
    evaluator = CentralizedPomdpBound(model)
    return sum(p * evaluator.value(b, remaining_steps) for p, b in _leaf_pairs(leaves))


def mdp_bound(model: RhoDecPomdp, leaves, remaining_steps: int) -> float:
    """Looser fully observable completion bound over an evaluation frontier."""
    evaluator = MdpBound(model)
    return sum(p * evaluator.value(b, remaining_steps) for p, b in _leaf_pairs(leaves))


@dataclass(frozen=True)
class SolveResult:
    policy: JointPolicy
    value: float
    nodes_expanded: int
    nodes_generated: int
    wall_time: float
    horizon: int
    optimal: bool = True
    bound_gap: float = 0.0

    def to_dict(self):
        return {
            "value": self.value,
            "horizon": self.horizon,
            "nodes_expanded": self.nodes_expanded,
            "nodes_generated": self.nodes_generated,
            "wall_time": self.wall_time,
            "optimal": self.optimal,
            "bound_gap": self.bound_gap,
        }


class _Frontier:
    """Reachable branches of a partial policy as packed arrays:
    probabilities (L,), beliefs (L, S), per-agent local observation-history
    indices (L, n)."""

    __slots__ = ("probs", "beliefs", "hists")

    def __init__(self, probs, beliefs, hists):
        self.probs = probs
        self.beliefs = beliefs
        self.hists = hists


class SearchNode:
    """Partial joint policy with its exact prefix value, heuristic
    completion bound, and evaluation frontier."""

    __slots__ = ("policy", "exact_value", "heuristic_value", "frontier", "expanded")

    def __init__(self, policy, exact_value, heuristic_value, frontier):
        self.policy = policy
        self.exact_value = exact_value
        self.heuristic_value = heuristic_value
        self.frontier = frontier
        self.expanded = False

    @property
    def priority(self) -> float:
        return self.exact_value + self.heuristic_value

    @property
    def depth(self) -> int:
        return self.policy.depth


# Cached per-(slots, actions) enumeration of all action assignments,
# as a (actions**slots, slots) digit matrix in lexicographic order.
_ASSIGNMENT_CACHE = {}


def _assignment_digits(slots: int, actions: int) -> np.ndarray:
    key = (slots, actions)
    cached = _ASSIGNMENT_CACHE.get(key)
    if cached is None:
        count = actions ** slots
        idx = np.arange(count)
        cached = np.empty((count, slots), dtype=np.int64)
        for s in range(slots):
            cached[:, s] = (idx // actions ** (slots - 1 - s)) % actions
        if len(_ASSIGNMENT_CACHE) > 8:
            _ASSIGNMENT_CACHE.clear()
        _ASSIGNMENT_CACHE[key] = cached
    return cached


class _Search:
    def __init__(self, model, horizon, evaluator, expansion_cap, rule_cap):
        self.model = model
        self.horizon = horizon
        self.evaluator = evaluator
        self.expansion_cap = expansion_cap
        self.rule_cap = rule_cap
        self.heap = []
        self.seq = 0
        self.expanded = 0
        self.generated = 0
        self.incumbent_value = -np.inf
        self.incumbent_policy = None
        self.incumbent_encoding = None
        self.obs_sizes = np.array(model.observation_sizes, dtype=np.int64)
        self.zcomp = model.observation_component_table
        # strides turning per-agent action components into a flat joint index
        strides = []
        acc = 1
        for m in reversed(model.action_sizes):
            strides.append(acc)
            acc *= m
        self.action_strides = tuple(reversed(strides))

    # -- incumbent handling ---------------------------------------------

    def _offer_complete(self, policy, value):
        if value > self.incumbent_value:
            better = True
        elif value == self.incumbent_value and self.incumbent_encoding is not None:
            better = policy.encoding() < self.incumbent_encoding
        else:
            better = False
        if better:
            self.incumbent_value = value
            self.incumbent_policy = policy
            self.incumbent_encoding = policy.encoding()

    def _tie_useless(self, node):
        """True when a node that cannot strictly beat the incumbent also
        cannot produce a lexicographically smaller equal-value policy: its
        level-major encoding prefix is not below the incumbent's."""
        if self.incumbent_encoding is None:
            return False
        prefix = node.policy.encoding()
        return prefix >= self.incumbent_encoding[:len(prefix)]

    def _push(self, node):
        heapq.heappush(self.heap, (-node.priority, self.seq, node))
        self.seq += 1

    def _exhausted(self, node):
        if self.incumbent_policy is None:
            result = None
            gap = np.inf
        else:
            result = SolveResult(
                policy=self.incumbent_policy, value=self.incumbent_value,
                nodes_expanded=self.expanded, nodes_generated=self.generated,
                wall_time=0.0, horizon=self.horizon, optimal=False,
                bound_gap=max(0.0, node.priority - self.incumbent_value))
            gap = result.bound_gap
        raise ResourceExhausted(result, gap)

    # -- expansion -------------------------------------------------------

    def expand(self, node):
        if self.expansion_cap is not None and self.expanded >= self.expansion_cap:
            self._exhausted(node)
        self.expanded += 1
        node.expanded = True
        if self.horizon - node.depth == 1:
            self._expand_final(node)
            return None
        return self._expand_interior(node)

    def _joint_rule_cap_check(self, counts):
        total = 1
        for c in counts:
            total *= c
        if total > self.rule_cap:
            raise CombinatorialLimit(total, self.rule_cap)
        return total

    def _expand_interior(self, node):
        model = self.model
        t = node.depth
        remaining = self.horizon - t
        frontier = node.frontier
        probs, beliefs, hists = frontier.probs, frontier.beliefs, frontier.hists
        n_leaves = len(probs)
        n_s = model.n_states
        n_z = model.n_joint_observations

        pred = np.einsum("ls,sap->lap", beliefs, model.transition)
        unnorm = pred[:, :, None, :] * model.observation_by_action[None]
        eta = unnorm.sum(axis=-1)
        live = eta > 0.0
        posts = np.divide(unnorm, eta[:, :, :, None],
                          out=np.zeros_like(unnorm), where=live[:, :, :, None])
        rho_t = rho_reward_table(model, beliefs)

        if remaining - 1 == 1:
            bound_t = self.evaluator.one_step_rows(
                posts.reshape(-1, n_s)).reshape(eta.shape)
            bound_t[~live] = 0.0
        else:
            bound_t = np.zeros(eta.shape)
            value = self.evaluator.value
            for l, a, z in zip(*np.nonzero(live)):
                bound_t[l, a, z] = value(posts[l, a, z], remaining - 1)
        h_sum = (eta * bound_t).sum(axis=-1)

        rules_per_agent = [
            list(enumerate_decision_rules(model.action_sizes[i],
                                          model.observation_sizes[i], t,
                                          cap=self.rule_cap))
            for i in range(model.n_agents)
        ]
        self._joint_rule_cap_check([len(r) for r in rules_per_agent])

        # local history continuations are action-independent: hoist them
        ext_hists = (hists[:, None, :] * self.obs_sizes[None, None, :]
                     + self.zcomp[None, :, :]).reshape(n_leaves * n_z, -1)
        leaf_idx = np.arange(n_leaves)

        if model.n_agents == 2:
            r1 = np.array(rules_per_agent[0], dtype=np.int64)
            r2 = np.array(rules_per_agent[1], dtype=np.int64)
            a1 = r1[:, hists[:, 0]]
            a2 = r2[:, hists[:, 1]]
            m2 = model.action_sizes[1]
            act = a1[:, None, :] * m2 + a2[None, :, :]
            exact_delta = np.einsum("ijl,l->ij", rho_t[leaf_idx, act], probs)
            heur = np.einsum("ijl,l->ij", h_sum[leaf_idx, act], probs)
            shape = (len(r1), len(r2))
            rule_lookup = lambda i, j: (rules_per_agent[0][i], rules_per_agent[1][j])
            act_lookup = lambda i, j: act[i, j]
        else:
            combos = list(product(*rules_per_agent))
            shape = (len(combos),)
            act_rows = np.empty((len(combos), n_leaves), dtype=np.int64)
            for k, rules in enumerate(combos):
                flat = np.zeros(n_leaves, dtype=np.int64)
                for i, rule in enumerate(rules):
                    flat += np.asarray(rule, dtype=np.int64)[hists[:, i]] \
                        * self.action_strides[i]
                act_rows[k] = flat
            exact_delta = (rho_t[leaf_idx, act_rows] * probs).sum(axis=1)
            heur = (h_sum[leaf_idx, act_rows] * probs).sum(axis=1)
            rule_lookup = lambda k: combos[k]
            act_lookup = lambda k: act_rows[k]

        priority = node.exact_value + exact_delta + heur
        self.generated += priority.size

        # Tie handling: when a child can at best tie the incumbent, it is
        # only worth keeping if its encoding prefix can still be smaller.
        tie_level = None
        ties_useful = self.incumbent_encoding is None
        if not ties_useful:
            prefix = node.policy.encoding()
            trunc = self.incumbent_encoding[:node.depth]
            if prefix < trunc:
                ties_useful = True
            elif prefix == trunc and node.depth < len(self.incumbent_encoding):
                tie_level = self.incumbent_encoding[node.depth]

        best_child = None
        threshold = self.incumbent_value - PRUNE_SLACK
        flat_order = np.ndindex(shape)
        prio_flat = priority.ravel()
        exact_flat = exact_delta.ravel()
        heur_flat = heur.ravel()
        for k, idx in enumerate(flat_order):
            pri = prio_flat[k]
            if pri <= threshold:
                continue
            if pri <= self.incumbent_value and not ties_useful:
                if tie_level is None or tuple(rule_lookup(*idx)) >= tie_level:
                    continue
            acts = act_lookup(*idx)
            child_probs = (probs[:, None] * eta[leaf_idx, acts]).ravel()
            mask = child_probs > 0.0
            child = SearchNode(
                node.policy.extended(rule_lookup(*idx)),
                node.exact_value + exact_flat[k],
                heur_flat[k],
                _Frontier(child_probs[mask],
                          posts[leaf_idx, acts].reshape(n_leaves * n_z, n_s)[mask],
                          ext_hists[mask]))
            self._push(child)
            if best_child is None or child.priority > best_child.priority:
                best_child = child
        return best_child

    def _expand_final(self, node):
        """Append the best last-step joint decision rule directly.

        The completion value of a last-step rule is a sum of per-branch
        rewards whose joint action is fixed by each agent's action at its
        local history, so the best rule is found by exhaustive optimization
        over per-history assignments instead of enumerating every joint
        rule as a separate node.
        """
        model = self.model
        t = node.depth
        frontier = node.frontier
        probs, beliefs, hists = frontier.probs, frontier.beliefs, frontier.hists
        weighted = rho_reward_table(model, beliefs) * probs[:, None]

        if model.n_agents == 1:
            m1 = model.action_sizes[0]
            slots = model.observation_sizes[0] ** t
            if m1 ** slots > self.rule_cap:
                raise CombinatorialLimit(m1 ** slots, self.rule_cap)
            w = np.zeros((slots, m1))
            np.add.at(w, hists[:, 0], weighted)
            rule = tuple(int(a) for a in w.argmax(axis=1))
            delta = float(w.max(axis=1).sum())
            rules = (rule,)
        elif model.n_agents == 2:
            m1, m2 = model.action_sizes
            s1 = model.observation_sizes[0] ** t
            s2 = model.observation_sizes[1] ** t
            count1 = m1 ** s1
            if count1 > self.rule_cap:
                raise CombinatorialLimit(count1, self.rule_cap)
            w4 = np.zeros((s1, s2, m1, m2))
            np.add.at(w4, (hists[:, 0], hists[:, 1]),
                      weighted.reshape(len(probs), m1, m2))
            digits = _assignment_digits(s1, m1)
            if m1 == 2:
                base = w4[:, :, 0, :].sum(axis=0).ravel()
                diff = (w4[:, :, 1, :] - w4[:, :, 0, :]).reshape(s1, s2 * m2)
                v = digits.astype(float) @ diff + base[None, :]
            else:
                onehot = np.zeros((count1, s1 * m1))
                cols = np.arange(s1) * m1
                onehot[np.arange(count1)[:, None], cols[None, :] + digits] = 1.0
                v = onehot @ w4.transpose(0, 2, 1, 3).reshape(s1 * m1, s2 * m2)
            v = v.reshape(count1, s2, m2)
            totals = v.max(axis=2).sum(axis=1)
            best = int(totals.argmax())
            rule1 = tuple(int(a) for a in digits[best])
            rule2 = tuple(int(a) for a in v[best].argmax(axis=1))
            delta = float(totals[best])
            rules = (rule1, rule2)
        else:
            rules_per_agent = [
                list(enumerate_decision_rules(model.action_sizes[i],
                                              model.observation_sizes[i], t,
                                              cap=self.rule_cap))
                for i in range(model.n_agents)
            ]
            self._joint_rule_cap_check([len(r) for r in rules_per_agent])
            best_delta, rules = -np.inf, None
            leaf_idx = np.arange(len(probs))
            for combo in product(*rules_per_agent):
                flat = np.zeros(len(probs), dtype=np.int64)
                for i, rule in enumerate(combo):
                    flat += np.asarray(rule, dtype=np.int64)[hists[:, i]] \
                        * self.action_strides[i]
                value = float(weighted[leaf_idx, flat].sum())
                if value > best_delta:
                    best_delta, rules = value, combo
            delta = best_delta

        self.generated += 1
        self._offer_complete(node.policy.extended(rules), node.exact_value + delta)

    # -- driver ----------------------------------------------------------

    def run(self):
        model = self.model
        b0 = model.initial_belief
        root = SearchNode(
            JointPolicy.empty(model), 0.0,
            self.evaluator.value(b0, self.horizon),
            _Frontier(np.ones(1), b0.reshape(1, -1),
                      np.zeros((1, model.n_agents), dtype=np.int64)))

        # Greedy dive to seat an incumbent early; every generated child also
        # lands on the open list, so nothing is lost.
        node = root
        while node is not None and node.depth < self.horizon:
            node = self.expand(node)

        while self.heap:
            neg_priority, _, node = heapq.heappop(self.heap)
            priority = -neg_priority
            if priority <= self.incumbent_value - PRUNE_SLACK:
                break  # max-heap: every remaining node is at most this good
            if node.expanded:
                continue
            if priority <= self.incumbent_value and self._tie_useless(node):
                continue  # can only tie, and every completion is lex-greater
            self.expand(node)

        if self.incumbent_policy is None:
            raise RuntimeError("search ended without a complete policy")
        return self.incumbent_policy, self.incumbent_value


def solve_maastar(model: RhoDecPomdp, horizon: int, heuristic: str = "pomdp",
                  expansion_cap=None, rule_cap: int = DEFAULT_RULE_CAP) -> SolveResult:
    """Best-first search for an optimal joint policy.

    Returns the maximizing joint policy with deterministic tie-breaking
    (lexicographically smallest policy encoding among equal values; the
    open list breaks equal priorities first-in-first-out in lexicographic
    generation order). Raises ResourceExhausted carrying the incumbent
    when ``expansion_cap`` node expansions are hit.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if heuristic not in HEURISTIC_KINDS:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    evaluator = (CentralizedPomdpBound(model) if heuristic == "pomdp"
                 else MdpBound(model))
    start = time.perf_counter()
    search = _Search(model, horizon, evaluator, expansion_cap, rule_cap)
    try:
        policy, value = search.run()
    except ResourceExhausted as exc:
        if exc.incumbent is not None:
            exc.incumbent = SolveResult(
                policy=exc.incumbent.policy, value=exc.incumbent.value,
                nodes_expanded=search.expanded, nodes_generated=search.generated,
                wall_time=time.perf_counter() - start, horizon=horizon,
                optimal=False, bound_gap=exc.bound_gap)
        raise
    return SolveResult(
        policy=policy, value=value, nodes_expanded=search.expanded,
        nodes_generated=search.generated,
        wall_time=time.perf_counter() - start, horizon=horizon)

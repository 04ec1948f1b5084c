"""Text exchange format for models, plus policy (de)serialization.

The format follows the conventional discrete Dec-POMDP text layout
(``agents``/``discount``/``values``/``states``/``actions``/``observations``/
``start`` directives followed by ``T:``/``O:``/``R:`` table lines with
label, index, or ``*`` wildcard addressing), extended with two directives:
``alpha:`` (uncertainty penalty weight, default 0) and ``uncertainty:``
(``none`` or ``shannon-entropy``, default ``none``). ``discount`` is
accepted but must equal 1; rewards are keyed on (action, state) only
(richer reward forms are rejected). Unspecified table entries default to
zero. Rows whose sums are within 1e-6 of one are renormalized; rows
further off are rejected.

The writer emits a canonical form (sorted rows, zeros omitted, 17
significant digits) so writing the same model twice is byte identical and
``parse_model(write_model(m))`` reproduces ``m`` exactly.
"""

import re

import numpy as np

from .errors import DimensionError, ModelSyntaxError, StochasticityError
from .model import RhoDecPomdp, UNCERTAINTY_KINDS, UNCERTAINTY_NONE, uniform_belief
from .policy import JointPolicy, LocalPolicyTree

_NORMALIZE_BELOW = 1e-6


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


class _Line:
    __slots__ = ("number", "tokens", "columns")

    def __init__(self, number, tokens, columns):
        self.number = number
        self.tokens = tokens
        self.columns = columns


def _tokenize(text):
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        spaced = body.replace(":", " : ")
        tokens, columns = [], []
        # column positions refer to the raw line for error messages
        search_from = 0
        for token in spaced.split():
            if token == ":":
                probe = raw.find(":", search_from)
            else:
                probe = raw.find(token, search_from)
            columns.append(probe + 1 if probe >= 0 else 1)
            search_from = probe + len(token) if probe >= 0 else search_from
            tokens.append(token)
        if tokens:
            lines.append(_Line(number, tokens, columns))
    return lines


def _split_segments(line):
    """Split a table line's tokens on ':' into (keyword, [segments])."""
    keyword = line.tokens[0]
    segments, current = [], []
    for tok in line.tokens[1:]:
        if tok == ":":
            segments.append(current)
            current = []
        else:
            current.append(tok)
    segments.append(current)
    # a leading ':' right after the keyword produces an empty first segment
    if segments and segments[0] == [] and len(segments) > 1:
        segments = segments[1:]
    return keyword, segments


def _parse_float(token, line, what="number"):
    try:
        return float(token)
    except ValueError:
        col = line.columns[line.tokens.index(token)] if token in line.tokens else None
        raise ModelSyntaxError(f"expected {what}, got {token!r}", line.number, col) from None


def _parse_probability(token, line):
    value = _parse_float(token, line, what="probability")
    if not 0.0 <= value <= 1.0:
        raise ModelSyntaxError(f"probability {value} outside [0, 1]", line.number)
    return value


class _Parser:
    def __init__(self, text):
        self.lines = _tokenize(text)
        self.pos = 0
        self.n_agents = None
        self.states = None
        self.actions = None
        self.observations = None
        self.start_spec = None
        self.alpha = 0.0
        self.uncertainty = UNCERTAINTY_NONE
        self.t_entries = []
        self.o_entries = []
        self.r_entries = []

    # -- cursor helpers --------------------------------------------------

    def _peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def _next(self):
        line = self._peek()
        if line is None:
            raise ModelSyntaxError("unexpected end of document",
                                   self.lines[-1].number if self.lines else 1)
        self.pos += 1
        return line

    # -- name resolution ---------------------------------------------------

    def _resolve(self, token, labels, what, line):
        if token == "*":
            return list(range(len(labels)))
        if token in labels:
            return [labels.index(token)]
        if re.fullmatch(r"\d+", token):
            idx = int(token)
            if idx >= len(labels):
                raise DimensionError(f"{what} index {idx} out of range "
                                     f"(have {len(labels)})", what, line.number)
            return [idx]
        raise ModelSyntaxError(f"unknown {what} {token!r}", line.number)

    def _resolve_joint(self, tokens, per_agent_labels, what, line):
        """Expand a joint action/observation segment to flat indices."""
        n = len(per_agent_labels)
        if tokens == ["*"]:
            sizes = [len(lbl) for lbl in per_agent_labels]
            total = int(np.prod(sizes))
            return list(range(total))
        if len(tokens) != n:
            raise DimensionError(
                f"{what} needs {n} per-agent entries or a single '*', got "
                f"{len(tokens)}", what, line.number)
        per_agent = [self._resolve(tok, per_agent_labels[i], what, line)
                     for i, tok in enumerate(tokens)]
        sizes = [len(lbl) for lbl in per_agent_labels]
        flats = [0]
        for i, choices in enumerate(per_agent):
            flats = [f * sizes[i] + c for f in flats for c in choices]
        return flats

    # -- directives --------------------------------------------------------

    def _space_line(self, line, what):
        tokens = line.tokens
        if len(tokens) == 1 and re.fullmatch(r"\d+", tokens[0]):
            count = int(tokens[0])
            if count < 1:
                raise DimensionError(f"{what} count must be >= 1", what, line.number)
            prefix = {"states": "s", "actions": "a", "observations": "o"}[what]
            return tuple(f"{prefix}{i}" for i in range(count))
        return tuple(tokens)

    def _parse_header(self):
        while True:
            line = self._peek()
            if line is None:
                break
            head = line.tokens[0]
            if head in ("T", "O", "R"):
                break
            self.pos += 1
            rest = [t for t in line.tokens[1:] if t != ":"]
            if head == "agents":
                if len(rest) != 1 or not re.fullmatch(r"\d+", rest[0]):
                    raise ModelSyntaxError("agents needs one integer", line.number)
                self.n_agents = int(rest[0])
                if self.n_agents < 1:
                    raise DimensionError("need at least one agent", "agents", line.number)
            elif head == "discount":
                if len(rest) != 1 or _parse_float(rest[0], line) != 1.0:
                    raise ModelSyntaxError(
                        "only undiscounted models are supported (discount: 1)",
                        line.number)
            elif head == "values":
                if rest != ["reward"]:
                    raise ModelSyntaxError(
                        "only 'values: reward' is supported", line.number)
            elif head == "states":
                if not rest:
                    raise DimensionError("states directive is empty", "states",
                                         line.number)
                self.states = self._space_line(_Line(line.number, rest, []), "states")
            elif head in ("actions", "observations"):
                if self.n_agents is None:
                    raise DimensionError(f"'agents:' must precede '{head}:'",
                                         head, line.number)
                rows = []
                if rest:
                    rows.append(self._space_line(_Line(line.number, rest, []), head))
                while len(rows) < self.n_agents:
                    payload = self._next()
                    rows.append(self._space_line(payload, head))
                if head == "actions":
                    self.actions = tuple(rows)
                else:
                    self.observations = tuple(rows)
            elif head == "start":
                if rest:
                    self.start_spec = (rest, line)
                else:
                    payload = self._next()
                    self.start_spec = (payload.tokens, payload)
            elif head == "alpha":
                if len(rest) != 1:
                    raise ModelSyntaxError("alpha needs one number", line.number)
                self.alpha = _parse_float(rest[0], line)
                if self.alpha < 0:
                    raise ModelSyntaxError("alpha must be nonnegative", line.number)
            elif head == "uncertainty":
                if len(rest) != 1 or rest[0] not in UNCERTAINTY_KINDS:
                    raise ModelSyntaxError(
                        f"uncertainty must be one of {UNCERTAINTY_KINDS}", line.number)
                self.uncertainty = rest[0]
            else:
                raise ModelSyntaxError(f"unknown directive {head!r}", line.number,
                                       line.columns[0])
        for name, value in (("agents", self.n_agents), ("states", self.states),
                            ("actions", self.actions),
                            ("observations", self.observations)):
            if value is None:
                raise DimensionError(f"missing directive '{name}:'", name)

    # -- tables --------------------------------------------------------------

    def _row_of_floats(self, tokens, expected, line, what):
        if len(tokens) != expected:
            raise DimensionError(f"{what} row needs {expected} entries, got "
                                 f"{len(tokens)}", what, line.number)
        return [_parse_probability(tok, line) for tok in tokens]

    def _matrix_payload(self, rows, cols, what):
        first = self._next()
        if first.tokens == ["uniform"]:
            return np.full((rows, cols), 1.0 / cols)
        if first.tokens == ["identity"]:
            if rows != cols:
                raise DimensionError("identity needs a square table", what,
                                     first.number)
            return np.eye(rows)
        matrix = [self._row_of_floats(first.tokens, cols, first, what)]
        while len(matrix) < rows:
            line = self._next()
            matrix.append(self._row_of_floats(line.tokens, cols, line, what))
        return np.array(matrix)

    def _parse_tables(self):
        n_states = len(self.states)
        n_joint_obs = int(np.prod([len(z) for z in self.observations]))
        while True:
            line = self._peek()
            if line is None:
                break
            self.pos += 1
            keyword, segments = _split_segments(line)
            if keyword not in ("T", "O", "R"):
                raise ModelSyntaxError(f"expected a T/O/R line, got {keyword!r}",
                                       line.number, line.columns[0])
            actions = self._resolve_joint(segments[0], self.actions, "actions", line)
            if keyword == "T":
                if len(segments) == 4:
                    src = self._resolve(segments[1][0], self.states, "states", line) \
                        if len(segments[1]) == 1 else None
                    dst = self._resolve(segments[2][0], self.states, "states", line) \
                        if len(segments[2]) == 1 else None
                    if src is None or dst is None or len(segments[3]) != 1:
                        raise ModelSyntaxError("malformed T entry", line.number)
                    p = _parse_probability(segments[3][0], line)
                    self.t_entries.append((actions, src, dst, p))
                elif len(segments) == 3:
                    src = self._resolve(segments[1][0], self.states, "states", line) \
                        if len(segments[1]) == 1 else None
                    if src is None:
                        raise ModelSyntaxError("malformed T row", line.number)
                    row = self._row_of_floats(segments[2], n_states, line, "T")
                    for s in src:
                        self.t_entries.append((actions, [s], list(range(n_states)),
                                               np.array(row)))
                elif len(segments) == 1:
                    matrix = self._matrix_payload(n_states, n_states, "T")
                    self.t_entries.append((actions, None, None, matrix))
                else:
                    raise ModelSyntaxError("malformed T line", line.number)
            elif keyword == "O":
                if len(segments) == 4:
                    dst = self._resolve(segments[1][0], self.states, "states", line) \
                        if len(segments[1]) == 1 else None
                    if dst is None or len(segments[3]) != 1:
                        raise ModelSyntaxError("malformed O entry", line.number)
                    obs = self._resolve_joint(segments[2], self.observations,
                                              "observations", line)
                    p = _parse_probability(segments[3][0], line)
                    self.o_entries.append((actions, dst, obs, p))
                elif len(segments) == 3:
                    dst = self._resolve(segments[1][0], self.states, "states", line) \
                        if len(segments[1]) == 1 else None
                    if dst is None:
                        raise ModelSyntaxError("malformed O row", line.number)
                    row = self._row_of_floats(segments[2], n_joint_obs, line, "O")
                    for s in dst:
                        self.o_entries.append((actions, [s],
                                               list(range(n_joint_obs)),
                                               np.array(row)))
                elif len(segments) == 1:
                    matrix = self._matrix_payload(n_states, n_joint_obs, "O")
                    self.o_entries.append((actions, None, None, matrix))
                else:
                    raise ModelSyntaxError("malformed O line", line.number)
            else:  # R
                if len(segments) == 3:
                    src = self._resolve(segments[1][0], self.states, "states", line) \
                        if len(segments[1]) == 1 else None
                    if src is None or len(segments[2]) != 1:
                        raise ModelSyntaxError("malformed R entry", line.number)
                    value = _parse_float(segments[2][0], line, what="reward")
                    self.r_entries.append((actions, src, value))
                elif len(segments) == 5:
                    if segments[2] != ["*"] or segments[3] != ["*"]:
                        raise DimensionError(
                            "rewards must be keyed on (action, state) only; "
                            "use '*' for next state and observation", "R",
                            line.number)
                    src = self._resolve(segments[1][0], self.states, "states", line) \
                        if len(segments[1]) == 1 else None
                    if src is None or len(segments[4]) != 1:
                        raise ModelSyntaxError("malformed R entry", line.number)
                    value = _parse_float(segments[4][0], line, what="reward")
                    self.r_entries.append((actions, src, value))
                else:
                    raise ModelSyntaxError("malformed R line", line.number)

    # -- assembly ------------------------------------------------------------

    def _assemble(self):
        n_states = len(self.states)
        n_actions = int(np.prod([len(a) for a in self.actions]))
        n_obs = int(np.prod([len(z) for z in self.observations]))

        transition = np.zeros((n_states, n_actions, n_states))
        for actions, src, dst, value in self.t_entries:
            if src is None:  # full matrix form
                for a in actions:
                    transition[:, a, :] = value
            elif isinstance(value, np.ndarray):
                for a in actions:
                    for s in src:
                        transition[s, a, :] = value
            else:
                for a in actions:
                    for s in src:
                        for s2 in dst:
                            transition[s, a, s2] = value

        observation = np.zeros((n_states, n_actions, n_obs))
        for actions, dst, obs, value in self.o_entries:
            if dst is None:
                for a in actions:
                    observation[:, a, :] = value
            elif isinstance(value, np.ndarray):
                for a in actions:
                    for s in dst:
                        observation[s, a, :] = value
            else:
                for a in actions:
                    for s in dst:
                        for z in obs:
                            observation[s, a, z] = value

        reward = np.zeros((n_states, n_actions))
        for actions, src, value in self.r_entries:
            for a in actions:
                for s in src:
                    reward[s, a] = value

        def normalize(table, what):
            # residuals at machine-noise level are left alone so that
            # parsing a written document reproduces it bit for bit
            sums = table.sum(axis=-1)
            for idx in np.ndindex(sums.shape):
                residual = float(sums[idx] - 1.0)
                if abs(residual) >= _NORMALIZE_BELOW:
                    raise StochasticityError((what,) + idx, residual)
                if abs(residual) > 1e-12:
                    table[idx] /= sums[idx]

        normalize(transition, "T")
        normalize(observation, "O")

        if self.start_spec is None:
            b0 = uniform_belief(n_states)
        else:
            tokens, line = self.start_spec
            if tokens == ["uniform"]:
                b0 = uniform_belief(n_states)
            elif len(tokens) == 1 and tokens[0] in self.states:
                b0 = np.zeros(n_states)
                b0[self.states.index(tokens[0])] = 1.0
            else:
                row = self._row_of_floats(tokens, n_states, line, "start")
                b0 = np.array(row)
                residual = float(b0.sum() - 1.0)
                if abs(residual) >= _NORMALIZE_BELOW:
                    raise StochasticityError(("start",), residual, line.number)
                if abs(residual) > 1e-12:
                    b0 /= b0.sum()

        return RhoDecPomdp(
            states=self.states, actions_per_agent=self.actions,
            observations_per_agent=self.observations,
            transition=transition, observation=observation, state_reward=reward,
            alpha=self.alpha, uncertainty=self.uncertainty, initial_belief=b0)

    def parse(self):
        self._parse_header()
        self._parse_tables()
        return self._assemble()


def parse_model(text: str) -> RhoDecPomdp:
    """Parse a model document. Raises ModelSyntaxError (with line/column),
    DimensionError (naming the directive), or StochasticityError (naming
    the row and residual)."""
    return _Parser(text).parse()


def write_model(model: RhoDecPomdp) -> str:
    """Canonical text form of a model: fixed directive order, sorted
    nonzero table rows, 17 significant digits. Byte-stable and exactly
    invertible by parse_model."""
    out = [f"agents: {model.n_agents}", "discount: 1", "values: reward",
           "states: " + " ".join(model.states), "actions:"]
    for labels in model.actions_per_agent:
        out.append(" ".join(labels))
    out.append("observations:")
    for labels in model.observations_per_agent:
        out.append(" ".join(labels))
    b0 = model.initial_belief
    if np.all(b0 == 1.0 / model.n_states):
        out.append("start: uniform")
    else:
        out.append("start: " + " ".join(_fmt(p) for p in b0))
    out.append(f"alpha: {_fmt(model.alpha)}")
    out.append(f"uncertainty: {model.uncertainty}")

    def action_tokens(flat):
        return " ".join(model.joint_action_labels(flat))

    for a in range(model.n_joint_actions):
        tokens = action_tokens(a)
        for s, label in enumerate(model.states):
            for s2, label2 in enumerate(model.states):
                p = model.transition[s, a, s2]
                if p != 0.0:
                    out.append(f"T: {tokens} : {label} : {label2} : {_fmt(p)}")
    for a in range(model.n_joint_actions):
        tokens = action_tokens(a)
        for s, label in enumerate(model.states):
            for z in range(model.n_joint_observations):
                p = model.observation[s, a, z]
                if p != 0.0:
                    zt = " ".join(model.joint_observation_labels(z))
                    out.append(f"O: {tokens} : {label} : {zt} : {_fmt(p)}")
    for a in range(model.n_joint_actions):
        tokens = action_tokens(a)
        for s, label in enumerate(model.states):
            r = model.state_reward[s, a]
            if r != 0.0:
                out.append(f"R: {tokens} : {label} : {_fmt(r)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# policy trees as nested records


def _tree_to_node(model, tree, agent, t, hist_index):
    node = {"action": model.actions_per_agent[agent][tree.action_at(t, hist_index)]}
    if t + 1 < tree.depth:
        base = hist_index * tree.n_observations
        node["children"] = [
            _tree_to_node(model, tree, agent, t + 1, base + z)
            for z in range(tree.n_observations)]
    return node


def policy_to_dict(model: RhoDecPomdp, policy: JointPolicy) -> dict:
    """Nested per-agent action/children records. Children are ordered by
    the agent's observation alphabet."""
    agents = []
    for i, tree in enumerate(policy.trees):
        agents.append({
            "agent": i,
            "actions": list(model.actions_per_agent[i]),
            "observations": list(model.observations_per_agent[i]),
            "tree": _tree_to_node(model, tree, i, 0, 0) if tree.depth else None,
        })
    return {"horizon": policy.depth, "agents": agents}


def policy_from_dict(model: RhoDecPomdp, data: dict) -> JointPolicy:
    depth = int(data["horizon"])
    trees = []
    for i, record in enumerate(data["agents"]):
        n_actions = model.action_sizes[i]
        n_obs = model.observation_sizes[i]
        levels = [[None] * (n_obs ** t) for t in range(depth)]

        def fill(node, t, hist_index):
            label = node["action"]
            levels[t][hist_index] = model.actions_per_agent[i].index(label)
            if t + 1 < depth:
                children = node["children"]
                if len(children) != n_obs:
                    raise ValueError(f"node at depth {t} needs {n_obs} children")
                for z, child in enumerate(children):
                    fill(child, t + 1, hist_index * n_obs + z)

        if depth:
            fill(record["tree"], 0, 0)
        trees.append(LocalPolicyTree(n_actions, n_obs,
                                     tuple(tuple(level) for level in levels)))
    return JointPolicy(tuple(trees))

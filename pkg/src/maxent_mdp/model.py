"""Core data model: MDPs, stationary policies, and induced Markov chains.

All algorithms in this package operate on dense integer state/action indices;
human-readable names are carried as metadata only. Probabilities are 64-bit
floats and row-stochasticity is checked to ``ROW_TOL``. Instances are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidModelError, PolicyMismatchError

ROW_TOL = 1e-9

# Transition table layout: trans[s][a] is a dict {target: probability} for
# action index a at state s. Dicts keep the support sparse; grids and products
# have out-degree <= 5 regardless of model size.
TransTable = tuple[tuple[dict[int, float], ...], ...]


def _freeze_rows(rows) -> TransTable:
    return tuple(tuple(dict(d) for d in per_state) for per_state in rows)


@dataclass(frozen=True)
class Mdp:
    """Finite MDP with labeled states.

    Attributes:
        states: state names, indexed 0..n-1.
        initial: index of the initial state.
        actions: per-state tuple of action names (non-empty for every state).
        trans: per-state, per-action sparse distribution over successor indices.
        ap: atomic proposition names.
        labels: per-state frozenset of atomic propositions.
    """

    states: tuple[str, ...]
    initial: int
    actions: tuple[tuple[str, ...], ...]
    trans: TransTable
    ap: tuple[str, ...] = ()
    labels: tuple[frozenset[str], ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = len(self.states)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(tuple(a) for a in self.actions))
        object.__setattr__(self, "trans", _freeze_rows(self.trans))
        object.__setattr__(self, "ap", tuple(self.ap))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(frozenset() for _ in range(n)))
        else:
            object.__setattr__(self, "labels", tuple(frozenset(l) for l in self.labels))
        if n == 0:
            raise InvalidModelError("MDP needs at least one state")
        if not 0 <= self.initial < n:
            raise InvalidModelError(f"initial state index {self.initial} out of range")
        if len(self.actions) != n or len(self.trans) != n or len(self.labels) != n:
            raise InvalidModelError("actions/trans/labels must have one entry per state")
        for s in range(n):
            if not self.actions[s]:
                raise InvalidModelError(f"state {self.states[s]} has no actions")
            if len(self.trans[s]) != len(self.actions[s]):
                raise InvalidModelError(f"state {self.states[s]}: action/transition mismatch")
            for a, dist in enumerate(self.trans[s]):
                for t, p in dist.items():
                    if not 0 <= t < n:
                        raise InvalidModelError(
                            f"target index {t} out of range at ({self.states[s]}, {self.actions[s][a]})"
                        )
                    if not isinstance(p, (int, float)):
                        raise InvalidModelError("probabilities must be numbers")
        ap_set = set(self.ap)
        for s in range(n):
            if not self.labels[s] <= ap_set:
                raise InvalidModelError(f"state {self.states[s]} labeled with unknown propositions")

    @property
    def n_states(self) -> int:
        return len(self.states)

    def n_actions(self, s: int) -> int:
        return len(self.actions[s])

    def succ(self, s: int, a: int) -> frozenset[int]:
        """Successor set of a state-action pair (positive-probability targets)."""
        return frozenset(t for t, p in self.trans[s][a].items() if p > 0)

    def digraph(self) -> list[set[int]]:
        """Adjacency over all actions: edge s -> t iff some action moves s to t."""
        adj: list[set[int]] = [set() for _ in range(self.n_states)]
        for s in range(self.n_states):
            for dist in self.trans[s]:
                adj[s].update(t for t, p in dist.items() if p > 0)
        return adj

    def state_index(self, name: str) -> int:
        try:
            return self.states.index(name)
        except ValueError:
            raise InvalidModelError(f"unknown state name {name!r}") from None


@dataclass(frozen=True)
class StationaryPolicy:
    """Per-state distribution over that state's actions.

    ``dist[s][a]`` is the probability of the a-th action of state s; rows are
    aligned with ``Mdp.actions``.
    """

    dist: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "dist", tuple(tuple(float(p) for p in row) for row in self.dist))
        for s, row in enumerate(self.dist):
            if not row:
                raise InvalidModelError(f"policy row {s} is empty")
            if min(row) < -ROW_TOL or abs(sum(row) - 1.0) > ROW_TOL:
                raise InvalidModelError(f"policy row {s} is not a distribution: {row}")

    @staticmethod
    def uniform(mdp: Mdp) -> "StationaryPolicy":
        return StationaryPolicy(
            tuple(tuple(1.0 / mdp.n_actions(s) for _ in mdp.actions[s]) for s in range(mdp.n_states))
        )

    @staticmethod
    def deterministic(mdp: Mdp, choice: dict[int, int] | None = None) -> "StationaryPolicy":
        """Pick one action per state (default: lowest index)."""
        choice = choice or {}
        rows = []
        for s in range(mdp.n_states):
            a = choice.get(s, 0)
            rows.append(tuple(1.0 if i == a else 0.0 for i in range(mdp.n_actions(s))))
        return StationaryPolicy(tuple(rows))

    @staticmethod
    def from_named(mdp: Mdp, mapping: dict[str, dict[str, float]]) -> "StationaryPolicy":
        """Build from ``{state name: {action name: probability}}``."""
        rows = []
        for s in range(mdp.n_states):
            per = mapping.get(mdp.states[s])
            if per is None:
                raise PolicyMismatchError(f"policy missing state {mdp.states[s]!r}")
            row = []
            for a_name in mdp.actions[s]:
                row.append(float(per.get(a_name, 0.0)))
            extra = set(per) - set(mdp.actions[s])
            if extra:
                raise PolicyMismatchError(f"policy names unknown actions {sorted(extra)} at {mdp.states[s]!r}")
            rows.append(tuple(row))
        return StationaryPolicy(tuple(rows))

    def as_named(self, mdp: Mdp) -> dict[str, dict[str, float]]:
        return {
            mdp.states[s]: {mdp.actions[s][a]: self.dist[s][a] for a in range(mdp.n_actions(s))}
            for s in range(mdp.n_states)
        }


@dataclass(frozen=True)
class MarkovChain:
    """Row-stochastic chain with the same labeling machinery as an MDP."""

    states: tuple[str, ...]
    initial: int
    rows: tuple[dict[int, float], ...]
    ap: tuple[str, ...] = ()
    labels: tuple[frozenset[str], ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        n = len(self.states)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "rows", tuple(dict(r) for r in self.rows))
        object.__setattr__(self, "ap", tuple(self.ap))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(frozenset() for _ in range(n)))
        else:
            object.__setattr__(self, "labels", tuple(frozenset(l) for l in self.labels))
        if len(self.rows) != n or not 0 <= self.initial < n:
            raise InvalidModelError("inconsistent chain shape")
        for s, row in enumerate(self.rows):
            total = 0.0
            for t, p in row.items():
                if not 0 <= t < n or p < -ROW_TOL:
                    raise InvalidModelError(f"bad entry ({s},{t})={p}")
                total += p
            if abs(total - 1.0) > 1e-7:
                raise InvalidModelError(f"chain row {self.states[s]} sums to {total}")

    @property
    def n_states(self) -> int:
        return len(self.states)

    def succ(self, s: int) -> frozenset[int]:
        return frozenset(t for t, p in self.rows[s].items() if p > 0)

    def prob(self, s: int, t: int) -> float:
        return self.rows[s].get(t, 0.0)

    def digraph(self) -> list[set[int]]:
        return [set(self.succ(s)) for s in range(self.n_states)]


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_mdp`. Empty ``violations`` means valid."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_mdp(mdp: Mdp) -> ValidationReport:
    """Check distribution and reachability invariants, reporting every violation.

    Violations checked: row-stochasticity of every (state, action) pair to
    ``ROW_TOL``, probabilities inside [0, 1], and reachability of every state
    in the digraph that keeps all actions' edges (a state no policy can reach
    is dead weight and breaks residence-time semantics).
    """
    violations: list[str] = []
    for s in range(mdp.n_states):
        for a, dist in enumerate(mdp.trans[s]):
            total = 0.0
            for t, p in dist.items():
                if p < 0 or p > 1 + ROW_TOL:
                    violations.append(
                        f"probability out of range at ({mdp.states[s]},{mdp.actions[s][a]},{mdp.states[t]}): {p}"
                    )
                total += p
            if abs(total - 1.0) > ROW_TOL:
                violations.append(
                    f"row-stochasticity at ({mdp.states[s]},{mdp.actions[s][a]}): sum={total!r}"
                )
    adj = mdp.digraph()
    seen = {mdp.initial}
    stack = [mdp.initial]
    while stack:
        for t in adj[stack.pop()]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    for s in range(mdp.n_states):
        if s not in seen:
            violations.append(f"unreachable state {mdp.states[s]} (under every policy)")
    return ValidationReport(tuple(violations))


def induce_chain(mdp: Mdp, policy: StationaryPolicy) -> MarkovChain:
    """Mix each state's action rows by the policy weights.

    Entry (s, t) of the result is sum_a pi_s(a) * P(s, a, t); labels and the
    initial state carry over unchanged.
    """
    if len(policy.dist) != mdp.n_states:
        raise PolicyMismatchError(
            f"policy covers {len(policy.dist)} states, model has {mdp.n_states}"
        )
    rows = []
    for s in range(mdp.n_states):
        if len(policy.dist[s]) != mdp.n_actions(s):
            raise PolicyMismatchError(
                f"policy row {mdp.states[s]} has {len(policy.dist[s])} entries, "
                f"state has {mdp.n_actions(s)} actions"
            )
        row: dict[int, float] = {}
        for a, w in enumerate(policy.dist[s]):
            if w == 0.0:
                continue
            for t, p in mdp.trans[s][a].items():
                if p > 0:
                    row[t] = row.get(t, 0.0) + w * p
        rows.append(row)
    return MarkovChain(mdp.states, mdp.initial, tuple(rows), mdp.ap, mdp.labels)


def path_prefix_probability(chain: MarkovChain, prefix: list[int]) -> float:
    """Probability of observing ``prefix`` as the first states of a run.

    The length-0 step case (prefix == [initial]) has probability 1; a prefix
    containing a zero-probability step has probability 0 rather than being an
    error.
    """
    if not prefix:
        raise InvalidModelError("prefix must contain at least the initial state")
    if prefix[0] != chain.initial:
        raise InvalidModelError("prefix must start at the chain's initial state")
    p = 1.0
    for s, t in zip(prefix, prefix[1:]):
        p *= chain.prob(s, t)
        if p == 0.0:
            return 0.0
    return p

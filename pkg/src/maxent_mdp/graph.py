"""Structural decompositions: SCCs, maximal end components, BSCCs,
reachability partitions, and maximal reachability probability.

All functions are pure and operate on immutable models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InvalidModelError
from .model import MarkovChain, Mdp


def strongly_connected_components(adj: list[set[int]] | list[list[int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Components come out in reverse
    topological order (every edge leaving a component points to an
    earlier-emitted component)."""
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        call_children: dict[int, list[int]] = {root: sorted(adj[root])}
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, ptr = work[-1]
            children = call_children[v]
            if ptr < len(children):
                work[-1] = (v, ptr + 1)
                w = children[ptr]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    call_children[w] = sorted(adj[w])
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    sccs.append(sorted(comp))
    return sccs


@dataclass(frozen=True)
class MecDecomposition:
    """Maximal end components of an MDP.

    ``mecs[i]`` is a pair (states, retained) where ``retained[s]`` lists the
    action indices whose successor sets stay inside the component.
    ``membership[s]`` is the MEC index of s, or None.
    """

    mecs: tuple[tuple[frozenset[int], dict[int, tuple[int, ...]]], ...]
    membership: tuple[int | None, ...]

    @property
    def union(self) -> frozenset[int]:
        out: set[int] = set()
        for states, _ in self.mecs:
            out |= states
        return frozenset(out)

    def retained_actions(self, s: int) -> tuple[int, ...]:
        i = self.membership[s]
        if i is None:
            return ()
        return self.mecs[i][1][s]


def maximal_end_components(mdp: Mdp) -> MecDecomposition:
    """Iterative SCC refinement: repeatedly drop actions whose successors
    leave the candidate component, then recompute SCCs, until stable.

    A singleton component only counts if some retained action self-loops.
    """
    n = mdp.n_states
    avail: list[set[int]] = [set(range(mdp.n_actions(s))) for s in range(n)]
    alive = set(range(n))

    while True:
        adj: list[set[int]] = [set() for _ in range(n)]
        for s in list(alive):
            for a in list(avail[s]):
                succs = mdp.succ(s, a)
                if not succs <= alive:
                    avail[s].discard(a)
                else:
                    adj[s] |= succs
            if not avail[s]:
                alive.discard(s)
        sccs = strongly_connected_components([sorted(adj[s]) if s in alive else [] for s in range(n)])
        comp_of = {}
        for i, comp in enumerate(sccs):
            for v in comp:
                comp_of[v] = i
        changed = False
        for s in list(alive):
            for a in list(avail[s]):
                if any(comp_of.get(t) != comp_of.get(s) for t in mdp.succ(s, a)):
                    avail[s].discard(a)
                    changed = True
            if not avail[s]:
                alive.discard(s)
                changed = True
        if not changed:
            break

    mecs = []
    for comp in sccs:
        members = [v for v in comp if v in alive]
        if not members:
            continue
        if len(members) == 1:
            v = members[0]
            if not any(v in mdp.succ(v, a) for a in avail[v]):
                continue
        retained = {s: tuple(sorted(avail[s])) for s in members}
        mecs.append((frozenset(members), retained))
    mecs.sort(key=lambda m: min(m[0]))
    membership: list[int | None] = [None] * n
    for i, (states, _) in enumerate(mecs):
        for s in states:
            membership[s] = i
    return MecDecomposition(tuple(mecs), tuple(membership))


def is_bsc_mec(mdp: Mdp, mec: tuple[frozenset[int], dict[int, tuple[int, ...]]]) -> bool:
    """A MEC is bottom strongly connected iff no state retains fewer actions
    than it has (no action can leave)."""
    states, retained = mec
    return all(len(retained[s]) == mdp.n_actions(s) for s in states)


def bottom_strongly_connected_components(
    chain: MarkovChain,
) -> tuple[list[frozenset[int]], frozenset[int]]:
    """BSCCs of a chain plus the transient complement (as index sets)."""
    adj = chain.digraph()
    sccs = strongly_connected_components(adj)
    bsccs = []
    for comp in sccs:
        comp_set = set(comp)
        if all(chain.succ(s) <= comp_set for s in comp):
            bsccs.append(frozenset(comp))
    bottom = set().union(*bsccs) if bsccs else set()
    transient = frozenset(range(chain.n_states)) - bottom
    return bsccs, frozenset(transient)


def reachable_from(adj: list[set[int]] | list[list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        for t in adj[stack.pop()]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def states_reaching(adj: list[set[int]] | list[list[int]], targets: set[int]) -> set[int]:
    """All states with a digraph path into ``targets`` (including targets)."""
    n = len(adj)
    radj: list[list[int]] = [[] for _ in range(n)]
    for s in range(n):
        for t in adj[s]:
            radj[t].append(s)
    seen = set(targets)
    stack = list(targets)
    while stack:
        for t in radj[stack.pop()]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


@dataclass(frozen=True)
class StatePartition:
    """Disjoint split of a state space around a goal region: the goal states
    themselves (``goal``), states that cannot reach them (``zero``), and the
    remainder (``rest``)."""

    goal: frozenset[int]
    zero: frozenset[int]
    rest: frozenset[int]


def partition_by_reachability(mdp: Mdp, goal: frozenset[int]) -> StatePartition:
    """zero := states from which ``goal`` is unreachable in the all-actions
    digraph (maximal reach probability 0); rest := everything else."""
    can_reach = states_reaching(mdp.digraph(), set(goal))
    zero = frozenset(range(mdp.n_states)) - frozenset(can_reach)
    rest = frozenset(can_reach) - goal
    return StatePartition(goal=frozenset(goal), zero=zero, rest=rest)


def max_reach_probability(mdp: Mdp, target: frozenset[int] | set[int]) -> float:
    """Maximum (over all policies) probability of reaching ``target`` from the
    initial state, by the standard reachability linear program.

    Qualitative preprocessing pins x = 0 where the target is graph-unreachable
    and x = 1 on the target; the LP minimizes sum(x) subject to
    x_s >= sum_t P(s,a,t) x_t for every action.
    """
    target = frozenset(target)
    if not target <= frozenset(range(mdp.n_states)):
        raise InvalidModelError("target contains unknown state indices")
    if mdp.initial in target:
        return 1.0
    part = partition_by_reachability(mdp, target)
    if mdp.initial in part.zero:
        return 0.0
    free = sorted(part.rest)
    pos = {s: i for i, s in enumerate(free)}
    n_free = len(free)

    rows = []
    rhs = []
    for s in free:
        for a in range(mdp.n_actions(s)):
            # x_s >= sum_t P x_t  ->  -x_s + sum_{t free} P x_t <= -P[target mass]
            coeff = np.zeros(n_free)
            coeff[pos[s]] -= 1.0
            const = 0.0
            for t, p in mdp.trans[s][a].items():
                if t in target:
                    const += p
                elif t in pos:
                    coeff[pos[t]] += p
            rows.append(coeff)
            rhs.append(-const)
    c = np.ones(n_free)
    res = linprog(
        c,
        A_ub=np.array(rows),
        b_ub=np.array(rhs),
        bounds=[(0, 1)] * n_free,
        method="highs",
    )
    if not res.success:
        raise InvalidModelError(f"reachability LP failed: {res.message}")
    return float(min(1.0, max(0.0, res.x[pos[mdp.initial]])))


def chain_reach_probability(chain: MarkovChain, target: frozenset[int] | set[int]) -> float:
    """Probability that the chain ever visits ``target`` from its initial state."""
    target = frozenset(target)
    if chain.initial in target:
        return 1.0
    can_reach = states_reaching(chain.digraph(), set(target))
    if chain.initial not in can_reach:
        return 0.0
    free = sorted(can_reach - target)
    pos = {s: i for i, s in enumerate(free)}
    a = np.eye(len(free))
    b = np.zeros(len(free))
    for s in free:
        for t, p in chain.rows[s].items():
            if t in target:
                b[pos[s]] += p
            elif t in pos:
                a[pos[s], pos[t]] -= p
    x = np.linalg.solve(a, b)
    return float(min(1.0, max(0.0, x[pos[chain.initial]])))

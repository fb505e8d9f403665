"""Product of an MDP with a deterministic Rabin automaton, accepting end
components, and entropy maximization under a reachability constraint.

The automaton component advances on the label of the state being entered, so
a product state (s, q) means "in s, having read the label history ending with
L(s)". The constrained pipeline turns "satisfy the task with probability at
least beta" into "reach the accepting end components with probability at
least beta and stay there", dispatches on the product's entropy class, and
finally fixes in-goal behavior so the goal region is closed and its revisit
set is hit infinitely often.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .entropy import EntropyClass, EntropyClassTag, chain_entropy, classify_max_entropy
from .errors import InfeasibleError, InvalidModelError, UnboundedObjectiveError
from .graph import (
    MecDecomposition,
    StatePartition,
    chain_reach_probability,
    is_bsc_mec,
    max_reach_probability,
    maximal_end_components,
    partition_by_reachability,
)
from .model import MarkovChain, Mdp, StationaryPolicy, induce_chain
from .program import Objective, SideConstraints, SolveStatus, build_program, solve_program
from .rabin import Dra
from .synthesis import (
    SynthesisOptions,
    SynthesisResult,
    _deterministic,
    _uniform_over,
    _with_rows,
    absorb_mec_states,
    extract_policy,
    quotient_mecs,
)

#: beta values this close to the maximal reach probability are clamped to it,
#: absorbing LP round-off in the feasibility pre-check.
BETA_MARGIN = 1e-9


@dataclass(frozen=True)
class ProductMdp:
    """MDP x DRA with lifted Rabin pairs and a back-mapping to factors."""

    mdp: Mdp
    pairs: tuple[tuple[frozenset[int], frozenset[int]], ...]
    back: tuple[tuple[int, int], ...]
    source: Mdp
    dra: Dra

    def project_state(self, i: int) -> tuple[int, int]:
        return self.back[i]


def product(mdp: Mdp, dra: Dra, prune: bool = True) -> ProductMdp:
    """Synchronous product. With ``prune`` (default) only states reachable
    from the initial pair are kept; without it the full state-pair grid is
    materialized."""
    if not frozenset(dra.ap) <= frozenset(mdp.ap):
        raise InvalidModelError(
            f"automaton alphabet {sorted(dra.ap)} is not over the model propositions {sorted(mdp.ap)}"
        )
    init = (mdp.initial, dra.step(dra.initial, mdp.labels[mdp.initial]))

    if prune:
        order: list[tuple[int, int]] = [init]
        index = {init: 0}
        stack = [init]
        while stack:
            s, q = stack.pop()
            for a in range(mdp.n_actions(s)):
                for t in mdp.succ(s, a):
                    tq = (t, dra.step(q, mdp.labels[t]))
                    if tq not in index:
                        index[tq] = len(order)
                        order.append(tq)
                        stack.append(tq)
        order = [init] + sorted(p for p in order if p != init)
        index = {p: i for i, p in enumerate(order)}
    else:
        order = [(s, q) for s in range(mdp.n_states) for q in range(dra.n_states)]
        index = {p: i for i, p in enumerate(order)}

    states = tuple(f"{mdp.states[s]}|{dra.states[q]}" for s, q in order)
    actions = tuple(mdp.actions[s] for s, _ in order)
    labels = tuple(mdp.labels[s] for s, _ in order)
    trans = []
    for s, q in order:
        per = []
        for a in range(mdp.n_actions(s)):
            dist = {}
            for t, p in mdp.trans[s][a].items():
                if p > 0:
                    dist[index[(t, dra.step(q, mdp.labels[t]))]] = p
            per.append(dist)
        trans.append(tuple(per))
    pmdp = Mdp(
        states=states,
        initial=index[init],
        actions=actions,
        trans=tuple(trans),
        ap=mdp.ap,
        labels=labels,
    )
    pairs = tuple(
        (
            frozenset(i for i, (_, q) in enumerate(order) if q in j),
            frozenset(i for i, (_, q) in enumerate(order) if q in k),
        )
        for j, k in dra.pairs
    )
    return ProductMdp(pmdp, pairs, tuple(order), mdp, dra)


def accepting_mec_indices(prod: ProductMdp, dec: MecDecomposition | None = None) -> set[int]:
    """End components avoiding some pair's J while touching its K."""
    dec = dec or maximal_end_components(prod.mdp)
    out = set()
    for i, (states, _) in enumerate(dec.mecs):
        for j, k in prod.pairs:
            if not (states & j) and (states & k):
                out.add(i)
                break
    return out


def reachability_partition(prod: ProductMdp, dec: MecDecomposition | None = None) -> StatePartition:
    """Split product states into accepting-MEC states, states that cannot
    reach them, and the remainder."""
    dec = dec or maximal_end_components(prod.mdp)
    acc = accepting_mec_indices(prod, dec)
    goal: set[int] = set()
    for i in acc:
        goal |= dec.mecs[i][0]
    return partition_by_reachability(prod.mdp, frozenset(goal))


def structure_report(prod: ProductMdp) -> dict:
    """Size and decomposition summary of a product."""
    mdp = prod.mdp
    triples = sum(
        sum(1 for p in dist.values() if p > 0)
        for s in range(mdp.n_states)
        for dist in mdp.trans[s]
    )
    choices = sum(mdp.n_actions(s) for s in range(mdp.n_states))
    edges = sum(len(adj) for adj in mdp.digraph())
    dec = maximal_end_components(mdp)
    acc = accepting_mec_indices(prod, dec)
    return {
        "states": mdp.n_states,
        "transitions": triples,
        "choices": choices,
        "edges": edges,
        "mecs": len(dec.mecs),
        "mec_sizes": [len(states) for states, _ in dec.mecs],
        "accepting_mecs": sorted(acc),
        "bsc_flags": [is_bsc_mec(mdp, mec) for mec in dec.mecs],
    }


# --------------------------------------------------------------------------
# in-goal steering


def _steer_rows(
    mdp: Mdp, dec: MecDecomposition, mec_index: int, revisit: frozenset[int]
) -> dict[int, tuple[float, ...]]:
    """Deterministic retained-action choices inside one end component that
    make every bottom component of the induced chain contain a revisit state.

    Distances to the nearest revisit state shrink with positive probability at
    every step (each state picks an action whose best successor is closer), so
    from anywhere in the component some revisit state stays reachable; since
    retained actions never leave the component, that pins revisit states into
    every bottom component.
    """
    states, retained = dec.mecs[mec_index]
    anchors = states & revisit
    if not anchors:
        raise InvalidModelError("steering needs a revisit state inside the component")
    dist = {s: (0 if s in anchors else math.inf) for s in states}
    for _ in range(len(states)):
        changed = False
        for s in states:
            if s in anchors:
                continue
            best = min(
                min(dist[t] for t in mdp.succ(s, a)) for a in retained[s]
            )
            if best + 1 < dist[s]:
                dist[s] = best + 1
                changed = True
        if not changed:
            break
    rows = {}
    for s in states:
        choice = retained[s][0]
        if s not in anchors:
            best = math.inf
            for a in retained[s]:
                d = min(dist[t] for t in mdp.succ(s, a))
                if d < best:
                    best = d
                    choice = a
        rows[s] = _deterministic(choice, mdp.n_actions(s))
    return rows


def _goal_closed_rows(
    prod: ProductMdp,
    dec: MecDecomposition,
    acc: set[int],
    randomize_mec: int | None = None,
) -> dict[int, tuple[float, ...]]:
    """Action rows for all accepting-MEC states: steer each accepting
    component through its revisit set, except ``randomize_mec`` which gets
    full support over retained actions."""
    rows: dict[int, tuple[float, ...]] = {}
    for i in acc:
        states, retained = dec.mecs[i]
        if i == randomize_mec:
            for s in states:
                rows[s] = _uniform_over(retained[s], prod.mdp.n_actions(s))
            continue
        revisit: frozenset[int] = frozenset()
        for j, k in prod.pairs:
            if not (states & j) and (states & k):
                revisit = states & k
                break
        rows.update(_steer_rows(prod.mdp, dec, i, revisit))
    return rows


# --------------------------------------------------------------------------
# constrained synthesis


@dataclass(frozen=True)
class FiniteMemoryController:
    """Product policy folded back onto the original model.

    Memory is the automaton state; it starts at the automaton's step on the
    initial label and advances on each observed state's label. The action
    distribution consulted at (state, memory) is the product policy's row.
    """

    dra: Dra
    source: Mdp
    action_rows: dict[tuple[int, int], tuple[float, ...]]

    def initial_memory(self) -> int:
        return self.dra.step(self.dra.initial, self.source.labels[self.source.initial])

    def update(self, memory: int, next_state: int) -> int:
        return self.dra.step(memory, self.source.labels[next_state])

    def action_distribution(self, state: int, memory: int) -> tuple[float, ...]:
        row = self.action_rows.get((state, memory))
        if row is None:
            raise InvalidModelError(
                f"controller has no row for state {self.source.states[state]} with memory "
                f"{self.dra.states[memory]} (unreachable under the synthesized policy)"
            )
        return row

    def memory_table(self) -> dict[str, dict[str, str]]:
        out: dict[str, dict[str, str]] = {}
        for q in range(self.dra.n_states):
            out[self.dra.states[q]] = {
                ",".join(sorted(letter)): self.dra.states[dest]
                for letter, dest in self.dra.transition[q].items()
            }
        return out


@dataclass(frozen=True)
class ConstrainedResult:
    """Outcome of entropy maximization under a reachability floor."""

    product: ProductMdp
    result: SynthesisResult
    beta_requested: float
    beta_achieved: float
    controller: FiniteMemoryController
    goal: frozenset[int]
    partition: StatePartition


def lift_policy(
    prod: ProductMdp, policy: StationaryPolicy
) -> FiniteMemoryController:
    """Fold a product policy into a finite-memory controller on the factors."""
    rows = {
        prod.back[i]: policy.dist[i] for i in range(prod.mdp.n_states)
    }
    return FiniteMemoryController(prod.dra, prod.source, rows)


def _beta_feasibility(prod: ProductMdp, goal: frozenset[int], beta: float) -> float:
    if not goal:
        raise InfeasibleError("the task admits no accepting end component in the product")
    max_reach = max_reach_probability(prod.mdp, goal)
    if beta > max_reach + BETA_MARGIN:
        raise InfeasibleError(
            f"requested satisfaction probability {beta} exceeds the maximum attainable {max_reach:.9f}"
        )
    return min(beta, max_reach)


def _almost_sure_restriction(prod: ProductMdp, zero: frozenset[int]) -> tuple[ProductMdp, dict[int, tuple[int, ...]], tuple[int, ...]]:
    """Sub-product on which the goal is reached almost surely by construction.

    Drops the zero-probability region and every action that can enter it,
    iterating because states may lose their whole action set. Returns the
    restricted product, the per-new-state tuple of retained original action
    indices, and the kept original state indices.
    """
    mdp = prod.mdp
    keep = set(range(mdp.n_states)) - set(zero)
    kept_actions: dict[int, tuple[int, ...]] = {}
    while True:
        kept_actions = {
            s: tuple(a for a in range(mdp.n_actions(s)) if mdp.succ(s, a) <= keep)
            for s in keep
        }
        dead = {s for s in keep if not kept_actions[s]}
        if not dead:
            break
        keep -= dead
    if mdp.initial not in keep:
        raise InfeasibleError(
            "initial state cannot reach the goal almost surely despite the LP saying so; "
            "this indicates an inconsistent model"
        )
    order = sorted(keep)
    new_of = {s: i for i, s in enumerate(order)}
    actions = tuple(tuple(mdp.actions[s][a] for a in kept_actions[s]) for s in order)
    trans = tuple(
        tuple(
            {new_of[t]: p for t, p in mdp.trans[s][a].items()}
            for a in kept_actions[s]
        )
        for s in order
    )
    sub = Mdp(
        states=tuple(mdp.states[s] for s in order),
        initial=new_of[mdp.initial],
        actions=actions,
        trans=trans,
        ap=mdp.ap,
        labels=tuple(mdp.labels[s] for s in order),
    )
    pairs = tuple(
        (
            frozenset(new_of[s] for s in j if s in keep),
            frozenset(new_of[s] for s in k if s in keep),
        )
        for j, k in prod.pairs
    )
    back = tuple(prod.back[s] for s in order)
    sub_prod = ProductMdp(sub, pairs, back, prod.source, prod.dra)
    return sub_prod, {new_of[s]: kept_actions[s] for s in keep}, tuple(order)


def synthesize_constrained(
    mdp: Mdp,
    dra: Dra,
    beta: float,
    opts: SynthesisOptions = SynthesisOptions(),
) -> ConstrainedResult:
    """Maximize process entropy subject to reaching (and staying in) the
    accepting region of the product with probability at least ``beta``."""
    if not 0 < beta <= 1:
        raise InvalidModelError("beta must lie in (0, 1]")
    prod = product(mdp, dra, prune=True)
    pmdp = prod.mdp
    dec = maximal_end_components(pmdp)
    part = reachability_partition(prod, dec)
    goal = part.goal
    beta_eff = _beta_feasibility(prod, goal, beta)
    notes: list[str] = []

    solve_prod = prod
    kept_actions: dict[int, tuple[int, ...]] | None = None
    kept_states: tuple[int, ...] = ()
    if beta_eff >= 1.0 - BETA_MARGIN and part.zero:
        # almost-sure satisfaction: remove the doomed region and every action
        # that risks it, so no extraction round-off can leak probability
        solve_prod, kept_actions, kept_states = _almost_sure_restriction(prod, part.zero)
        notes.append("restricted to the almost-surely-winning sub-product (beta = 1)")

    sub_policy = _dispatch_constrained(solve_prod, beta_eff, opts, notes)
    if kept_actions is None:
        policy = sub_policy.policy
    else:
        rows = []
        new_of = {s: i for i, s in enumerate(kept_states)}
        for s in range(pmdp.n_states):
            k = pmdp.n_actions(s)
            if s in new_of:
                row = [0.0] * k
                i = new_of[s]
                for j, a in enumerate(kept_actions[i]):
                    row[a] = sub_policy.policy.dist[i][j]
                rows.append(tuple(row))
            else:
                rows.append(tuple(1.0 if a == 0 else 0.0 for a in range(k)))
        policy = StationaryPolicy(tuple(rows))

    # the floor must also hold for the extracted policy, not just the solver
    # iterate; bump the target and re-solve if normalization round-off leaks
    target = beta_eff
    for _ in range(4):
        chain = induce_chain(pmdp, policy)
        beta_achieved = chain_reach_probability(chain, goal)
        if beta_achieved >= beta_eff - 1e-6 or kept_actions is not None:
            break
        max_reach = max_reach_probability(pmdp, goal)
        bump = min(max_reach, target + max(10 * (beta_eff - beta_achieved), 1e-6))
        if bump <= target:
            break
        target = bump
        notes.append(f"re-solved with reach target {target:.9f} to absorb extraction round-off")
        sub_policy = _dispatch_constrained(solve_prod, target, opts, notes)
        policy = sub_policy.policy

    chain = induce_chain(pmdp, policy)
    beta_achieved = chain_reach_probability(chain, goal)
    achieved = chain_entropy(chain)
    result = SynthesisResult(
        entropy_class=sub_policy.entropy_class,
        policy=policy,
        achieved_bits=achieved,
        objective_bits=sub_policy.objective_bits,
        solution=sub_policy.solution,
        notes=tuple(list(sub_policy.notes) + notes),
    )
    controller = lift_policy(prod, policy)
    return ConstrainedResult(
        product=prod,
        result=result,
        beta_requested=beta,
        beta_achieved=beta_achieved,
        controller=controller,
        goal=goal,
        partition=part,
    )


def _dispatch_constrained(
    prod: ProductMdp, beta: float, opts: SynthesisOptions, notes: list[str]
) -> SynthesisResult:
    pmdp = prod.mdp
    dec = maximal_end_components(pmdp)
    acc = accepting_mec_indices(prod, dec)
    part = reachability_partition(prod, dec)
    cls = classify_max_entropy(pmdp)
    if cls.tag is EntropyClassTag.FINITE:
        return _constrained_finite(prod, dec, acc, part.goal, beta, opts, notes)
    if cls.tag is EntropyClassTag.UNBOUNDED:
        return _constrained_unbounded(prod, dec, cls, acc, part.goal, beta, opts, notes)
    return _constrained_infinite(prod, dec, cls, acc, part, beta, opts, notes)


def _constrained_finite(prod, dec, acc, goal, beta, opts, notes) -> SynthesisResult:
    pmdp = prod.mdp
    absorbed = dec.union
    mdp_abs = absorb_mec_states(pmdp, absorbed)
    program = build_program(
        mdp_abs, absorbed, Objective.ENTROPY,
        SideConstraints(gamma=opts.gamma, reach=(goal, beta)),
    )
    sol = solve_program(program, tol=opts.tol, backend=opts.backend)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError("reachability floor is infeasible in the finite-class program")
    if sol.status is not SolveStatus.OPTIMAL:
        raise InvalidModelError(f"constrained program did not solve: {sol.status.value}")
    policy = extract_policy(pmdp, sol, absorbed)
    policy = _with_rows(policy, _goal_closed_rows(prod, dec, acc))
    return SynthesisResult(
        entropy_class=EntropyClass(EntropyClassTag.FINITE),
        policy=policy,
        achieved_bits=math.nan,
        objective_bits=sol.objective_bits,
        solution=sol,
    )


def _constrained_unbounded(prod, dec, cls, acc, goal, beta, opts, notes) -> SynthesisResult:
    pmdp = prod.mdp
    absorbed = set()
    for i, mec in enumerate(dec.mecs):
        if is_bsc_mec(pmdp, mec) or i in acc:
            absorbed |= mec[0]
    absorbed = frozenset(absorbed)
    mdp_abs = absorb_mec_states(pmdp, absorbed)

    if opts.ell is not None:
        program = build_program(
            mdp_abs, absorbed, Objective.FEASIBILITY,
            SideConstraints(ell=opts.ell, gamma=opts.gamma, reach=(goal, beta)),
        )
        sol = solve_program(program, tol=opts.tol, backend=opts.backend)
        if sol.status is SolveStatus.INFEASIBLE:
            raise InfeasibleError(
                f"no policy satisfies both entropy >= {opts.ell} bits and the reachability floor"
            )
        if sol.status is not SolveStatus.OPTIMAL:
            raise InvalidModelError(f"floor program did not solve: {sol.status.value}")
        notes.append(f"entropy-floor route, ell={opts.ell}")
    else:
        program = build_program(
            mdp_abs, absorbed, Objective.ENTROPY,
            SideConstraints(gamma=opts.gamma, reach=(goal, beta)),
        )
        sol = solve_program(program, tol=opts.tol, backend=opts.backend)
        if sol.status is SolveStatus.UNBOUNDED:
            raise UnboundedObjectiveError(
                "constrained maximum entropy is unbounded: supply an entropy floor "
                "(ell) or a residence-time cap (gamma)"
            )
        if sol.status is SolveStatus.INFEASIBLE:
            raise InfeasibleError("reachability floor is infeasible")
        if sol.status is not SolveStatus.OPTIMAL:
            raise InvalidModelError(f"constrained program did not solve: {sol.status.value}")
        if opts.gamma is not None:
            notes.append(f"residence-cap route, gamma={opts.gamma}")
        else:
            notes.append("constrained optimum is bounded; no cap needed")
    policy = extract_policy(pmdp, sol, absorbed)
    policy = _with_rows(policy, _goal_closed_rows(prod, dec, acc))
    return SynthesisResult(
        entropy_class=cls,
        policy=policy,
        achieved_bits=math.nan,
        objective_bits=sol.objective_bits,
        solution=sol,
    )


def _constrained_infinite(prod, dec, cls, acc, part, beta, opts, notes) -> SynthesisResult:
    pmdp = prod.mdp
    witness = cls.witness_state
    w_mec = dec.membership[witness]
    goal = part.goal
    w_is_bsc = is_bsc_mec(pmdp, dec.mecs[w_mec])

    if not w_is_bsc and witness in part.rest:
        # a witness outside the goal-or-doomed region cannot be made recurrent
        # while the reachability floor binds; fall back to the capped route
        notes.append(
            f"witness {pmdp.states[witness]} sits in the reachable remainder; "
            "constrained entropy is unbounded, using the capped route"
        )
        return _constrained_unbounded(prod, dec, cls, acc, goal, beta, opts, notes)

    collapse = {i for i, mec in enumerate(dec.mecs) if is_bsc_mec(pmdp, mec)}
    collapse |= set(acc)
    collapse.add(w_mec)
    quotient = quotient_mecs(pmdp, dec, collapse)
    qmdp = quotient.mdp
    absorbed = frozenset(quotient.rep.values())
    goal_q = frozenset(quotient.rep[i] for i in acc)
    target = quotient.rep[w_mec]
    non_bsc_remaining = len(dec.mecs) > len(collapse)
    if non_bsc_remaining and opts.gamma is None:
        raise UnboundedObjectiveError(
            "product keeps an uncollapsed non-bottom end component; supply a "
            "residence-time cap (gamma)"
        )
    program = build_program(
        qmdp, absorbed, Objective.FEASIBILITY,
        SideConstraints(
            gamma=opts.gamma,
            reach=(goal_q, beta),
            positive=(target, opts.epsilon),
        ),
    )
    sol = solve_program(program, tol=opts.tol, backend=opts.backend)
    if sol.status is SolveStatus.INFEASIBLE:
        notes.append(
            "cannot combine positive witness mass with the reachability floor; "
            "constrained entropy is unbounded, using the capped route"
        )
        return _constrained_unbounded(prod, dec, cls, acc, goal, beta, opts, notes)
    if sol.status is not SolveStatus.OPTIMAL:
        raise InvalidModelError(f"witness program did not solve: {sol.status.value}")
    notes.append(f"witness state {pmdp.states[witness]} made stochastic and recurrent")

    q_policy = extract_policy(qmdp, sol, absorbed)
    rows = []
    for s in range(pmdp.n_states):
        i = dec.membership[s]
        if i is not None and i in collapse:
            rows.append(_deterministic(dec.mecs[i][1][s][0], pmdp.n_actions(s)))
        else:
            rows.append(q_policy.dist[quotient.to_quotient[s]])
    policy = StationaryPolicy(tuple(rows))
    policy = _with_rows(policy, _goal_closed_rows(prod, dec, acc, randomize_mec=w_mec))
    if w_mec not in acc:
        # witness component outside the goal still needs full support
        states, retained = dec.mecs[w_mec]
        policy = _with_rows(
            policy,
            {s: _uniform_over(retained[s], pmdp.n_actions(s)) for s in states},
        )
    return SynthesisResult(
        entropy_class=cls,
        policy=policy,
        achieved_bits=math.inf,
        objective_bits=None,
        solution=sol,
        notes=tuple(notes),
    )

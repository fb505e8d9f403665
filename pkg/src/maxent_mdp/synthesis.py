"""Policy synthesis: absorb end components, solve the occupancy program, and
normalize the solution into a stationary policy.

Dispatch follows the entropy trichotomy. Finite: the program's optimum is the
maximum entropy and the normalized occupancy is an optimal policy. Unbounded:
no maximum exists; either satisfy an entropy floor (feasibility) or maximize
under a residence-time cap. Infinite: collapse bottom end components to
representative absorbing states, force positive reach probability into the
witness component, then randomize inside it so the witness state is both
stochastic and recurrent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import EntropyClass, EntropyClassTag, chain_entropy, classify_max_entropy
from .errors import InfeasibleError, InvalidModelError, UnboundedObjectiveError
from .graph import MecDecomposition, is_bsc_mec, maximal_end_components
from .model import Mdp, StationaryPolicy, induce_chain
from .program import (
    DEFAULT_TOL,
    Objective,
    SideConstraints,
    SolutionVector,
    SolveStatus,
    ZERO_MASS,
    build_program,
    solve_program,
)

DEFAULT_EPSILON = 1e-6


def absorb_mec_states(mdp: Mdp, states: frozenset[int] | set[int]) -> Mdp:
    """Make every action of every state in ``states`` a self-loop."""
    states = frozenset(states)
    if not states <= frozenset(range(mdp.n_states)):
        raise InvalidModelError("absorb set contains unknown state indices")
    trans = []
    for s in range(mdp.n_states):
        if s in states:
            trans.append(tuple({s: 1.0} for _ in mdp.actions[s]))
        else:
            trans.append(mdp.trans[s])
    return Mdp(mdp.states, mdp.initial, mdp.actions, tuple(trans), mdp.ap, mdp.labels)


def extract_policy(mdp: Mdp, sol: SolutionVector, absorbed: frozenset[int]) -> StationaryPolicy:
    """Normalize occupancy into action probabilities.

    Where the total mass at a state is below threshold (and at absorbed
    states) the choice is immaterial for the objective; the lowest action
    index is picked for reproducibility.
    """
    rows = []
    for s in range(mdp.n_states):
        k = mdp.n_actions(s)
        if s in absorbed:
            rows.append(tuple(1.0 if a == 0 else 0.0 for a in range(k)))
            continue
        mass = [max(0.0, sol.lam_sa.get((s, a), 0.0)) for a in range(k)]
        total = sum(mass)
        if total > ZERO_MASS:
            rows.append(tuple(m / total for m in mass))
        else:
            rows.append(tuple(1.0 if a == 0 else 0.0 for a in range(k)))
    return StationaryPolicy(tuple(rows))


@dataclass(frozen=True)
class SynthesisResult:
    """Synthesized policy plus certificates.

    ``achieved_bits`` is the re-evaluated entropy of the chain the policy
    induces on the original model (``inf`` only for the infinite class).
    ``objective_bits`` is the solver's optimum where one was solved.
    """

    entropy_class: EntropyClass
    policy: StationaryPolicy
    achieved_bits: float
    objective_bits: float | None
    solution: SolutionVector | None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SynthesisOptions:
    """Route selection for classes without a finite maximum.

    ell: target entropy floor in bits (feasibility route).
    gamma: residence-time cap (capped-maximization route).
    epsilon: lower bound standing in for strict positivity of the witness
        component's reach probability (infinite class).
    tol: solver tolerance.
    """

    ell: float | None = None
    gamma: float | None = None
    epsilon: float = DEFAULT_EPSILON
    tol: float = DEFAULT_TOL
    backend: str | None = None


def _uniform_over(actions: tuple[int, ...], k: int) -> tuple[float, ...]:
    w = 1.0 / len(actions)
    return tuple(w if a in actions else 0.0 for a in range(k))


def _deterministic(a: int, k: int) -> tuple[float, ...]:
    return tuple(1.0 if i == a else 0.0 for i in range(k))


def _with_rows(policy: StationaryPolicy, updates: dict[int, tuple[float, ...]]) -> StationaryPolicy:
    rows = list(policy.dist)
    for s, row in updates.items():
        rows[s] = row
    return StationaryPolicy(tuple(rows))


def synthesize_finite(mdp: Mdp, dec: MecDecomposition, opts: SynthesisOptions) -> SynthesisResult:
    absorbed = dec.union
    mdp_abs = absorb_mec_states(mdp, absorbed)
    program = build_program(mdp_abs, absorbed, Objective.ENTROPY, SideConstraints(gamma=opts.gamma))
    sol = solve_program(program, tol=opts.tol, backend=opts.backend)
    if sol.status is not SolveStatus.OPTIMAL:
        raise InvalidModelError(f"finite-class program did not solve: {sol.status.value}")
    policy = extract_policy(mdp, sol, absorbed)
    achieved = chain_entropy(induce_chain(mdp, policy))
    return SynthesisResult(
        entropy_class=EntropyClass(EntropyClassTag.FINITE),
        policy=policy,
        achieved_bits=achieved,
        objective_bits=sol.objective_bits,
        solution=sol,
    )


def _bsc_mec_states(mdp: Mdp, dec: MecDecomposition) -> frozenset[int]:
    out: set[int] = set()
    for mec in dec.mecs:
        if is_bsc_mec(mdp, mec):
            out |= mec[0]
    return frozenset(out)


def synthesize_unbounded(
    mdp: Mdp, dec: MecDecomposition, cls: EntropyClass, opts: SynthesisOptions
) -> SynthesisResult:
    if opts.ell is None and opts.gamma is None:
        raise UnboundedObjectiveError(
            "maximum entropy is unbounded: supply an entropy floor (ell) or a "
            "residence-time cap (gamma) to choose a synthesis route"
        )
    bottom = _bsc_mec_states(mdp, dec)
    mdp_abs = absorb_mec_states(mdp, bottom)
    notes = []
    if opts.ell is not None:
        program = build_program(
            mdp_abs, bottom, Objective.FEASIBILITY,
            SideConstraints(ell=opts.ell, gamma=opts.gamma),
        )
        sol = solve_program(program, tol=opts.tol, backend=opts.backend)
        if sol.status is SolveStatus.INFEASIBLE:
            raise InfeasibleError(f"no stationary policy reaches entropy {opts.ell} bits")
        if sol.status not in (SolveStatus.OPTIMAL,):
            raise InvalidModelError(f"floor program did not solve: {sol.status.value}")
        notes.append(f"entropy-floor route, ell={opts.ell}")
    else:
        program = build_program(
            mdp_abs, bottom, Objective.ENTROPY, SideConstraints(gamma=opts.gamma)
        )
        sol = solve_program(program, tol=opts.tol, backend=opts.backend)
        if sol.status is not SolveStatus.OPTIMAL:
            raise InvalidModelError(f"capped program did not solve: {sol.status.value}")
        notes.append(f"residence-cap route, gamma={opts.gamma} (unbounded class)")
    policy = extract_policy(mdp, sol, bottom)
    achieved = chain_entropy(induce_chain(mdp, policy))
    return SynthesisResult(
        entropy_class=cls,
        policy=policy,
        achieved_bits=achieved,
        objective_bits=sol.objective_bits,
        solution=sol,
        notes=tuple(notes),
    )


# --------------------------------------------------------------------------
# infinite class: quotient of bottom end components


@dataclass(frozen=True)
class MecQuotient:
    """Model with selected end components collapsed to absorbing states.

    ``rep[i]`` is the quotient-state index representing collapsed MEC i;
    ``to_quotient[s]`` maps original states to quotient states.
    """

    mdp: Mdp
    rep: dict[int, int]
    to_quotient: tuple[int, ...]
    collapsed: tuple[int, ...]


def quotient_mecs(mdp: Mdp, dec: MecDecomposition, which: set[int]) -> MecQuotient:
    """Collapse each MEC index in ``which`` to one absorbing state."""
    keep = [s for s in range(mdp.n_states) if dec.membership[s] not in which]
    to_q: list[int] = [-1] * mdp.n_states
    names: list[str] = []
    for s in keep:
        to_q[s] = len(names)
        names.append(mdp.states[s])
    rep: dict[int, int] = {}
    for i in sorted(which):
        rep[i] = len(names)
        names.append(f"mec{i}")
        for s in dec.mecs[i][0]:
            to_q[s] = rep[i]

    actions: list[tuple[str, ...]] = []
    trans = []
    labels = []
    for s in keep:
        actions.append(mdp.actions[s])
        per = []
        for a in range(mdp.n_actions(s)):
            dist: dict[int, float] = {}
            for t, p in mdp.trans[s][a].items():
                if p > 0:
                    qt = to_q[t]
                    dist[qt] = dist.get(qt, 0.0) + p
            per.append(dist)
        trans.append(tuple(per))
        labels.append(mdp.labels[s])
    for i in sorted(which):
        actions.append(("stay",))
        trans.append(({rep[i]: 1.0},))
        labels.append(frozenset())
    qmdp = Mdp(
        states=tuple(names),
        initial=to_q[mdp.initial],
        actions=tuple(actions),
        trans=tuple(trans),
        ap=mdp.ap,
        labels=tuple(labels),
    )
    return MecQuotient(qmdp, rep, tuple(to_q), tuple(sorted(which)))


def synthesize_infinite(
    mdp: Mdp, dec: MecDecomposition, cls: EntropyClass, opts: SynthesisOptions
) -> SynthesisResult:
    witness = cls.witness_state
    assert witness is not None
    w_mec = dec.membership[witness]
    assert w_mec is not None
    notes = [f"witness state {mdp.states[witness]} (first in state order)"]

    bsc = {i for i, mec in enumerate(dec.mecs) if is_bsc_mec(mdp, mec)}
    collapse = set(bsc) | {w_mec}
    quotient = quotient_mecs(mdp, dec, collapse)
    qmdp = quotient.mdp
    absorbed = frozenset(quotient.rep.values())
    target = quotient.rep[w_mec]

    non_bsc_remaining = len(dec.mecs) > len(collapse)
    if non_bsc_remaining and opts.gamma is None:
        raise UnboundedObjectiveError(
            "model keeps an end component that is not bottom strongly connected "
            "after collapsing; supply a residence-time cap (gamma)"
        )
    program = build_program(
        qmdp,
        absorbed,
        Objective.FEASIBILITY,
        SideConstraints(gamma=opts.gamma, positive=(target, opts.epsilon)),
    )
    sol = solve_program(program, tol=opts.tol, backend=opts.backend)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError("cannot steer positive probability into the witness component")
    if sol.status is not SolveStatus.OPTIMAL:
        raise InvalidModelError(f"witness program did not solve: {sol.status.value}")

    q_policy = extract_policy(qmdp, sol, absorbed)
    rows = []
    for s in range(mdp.n_states):
        i = dec.membership[s]
        if i == w_mec:
            # full support over retained actions keeps the component a BSCC of
            # the induced chain and makes the witness state stochastic
            rows.append(_uniform_over(dec.mecs[i][1][s], mdp.n_actions(s)))
        elif i in collapse:
            rows.append(_deterministic(dec.mecs[i][1][s][0], mdp.n_actions(s)))
        else:
            rows.append(q_policy.dist[quotient.to_quotient[s]])
    policy = StationaryPolicy(tuple(rows))
    return SynthesisResult(
        entropy_class=cls,
        policy=policy,
        achieved_bits=math.inf,
        objective_bits=None,
        solution=sol,
        notes=tuple(notes),
    )


def synthesize_max_entropy(mdp: Mdp, opts: SynthesisOptions = SynthesisOptions()) -> SynthesisResult:
    """Classify the model and run the matching synthesis procedure."""
    cls = classify_max_entropy(mdp)
    dec = maximal_end_components(mdp)
    if cls.tag is EntropyClassTag.FINITE:
        return synthesize_finite(mdp, dec, opts)
    if cls.tag is EntropyClassTag.UNBOUNDED:
        return synthesize_unbounded(mdp, dec, cls, opts)
    return synthesize_infinite(mdp, dec, cls, opts)


def min_expected_time(
    mdp_absorbed: Mdp,
    absorbed: frozenset[int],
    beta: float,
    goal: frozenset[int],
    rest: frozenset[int],
    tol: float = DEFAULT_TOL,
    backend: str | None = None,
) -> float:
    """Minimum expected number of steps spent outside the absorbed set while
    reaching ``goal`` with probability at least ``beta`` (a linear program).
    """
    program = build_program(
        mdp_absorbed,
        absorbed,
        Objective.MIN_TIME,
        SideConstraints(reach=(frozenset(goal), beta)),
        min_time_states=rest,
    )
    sol = solve_program(program, tol=tol, backend=backend)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError(f"reach probability {beta} is not attainable")
    if sol.status is not SolveStatus.OPTIMAL:
        raise InvalidModelError(f"min-time program did not solve: {sol.status.value}")
    return float(sol.objective_bits)

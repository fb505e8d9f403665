"""Occupancy-measure convex program over linear + exponential cones.

The decision variables are expected residence times lambda(s, a) for states
outside the absorbed set C and reach probabilities lambda(s) for states inside
it. Flow balance ties outflow minus inflow to the initial-state indicator.
Each entropy term eta(s,t) * log(nu(s) / eta(s,t)) is represented exactly by a
hypograph scalar constrained to the exponential cone
{(x, y, z) : y * exp(x / y) <= z, y > 0}, so the whole program is conic and a
primal-dual interior-point backend solves it to high accuracy.

The backend boundary is the narrow :class:`ConicData` contract (solve
``min q.x  s.t.  A x + s = b, s in K``); Clarabel is the default backend and
SCS a drop-in substitute (select with ``backend="scs"`` or the
``MAXENT_SOLVER`` environment variable).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import InvalidModelError, SolverError
from .model import Mdp

LN2 = math.log(2.0)

#: Policy-extraction threshold: below this total mass a state's action choice
#: is arbitrary (matches the 0*log(0/0) = 0 convention of the objective).
ZERO_MASS = 1e-9

DEFAULT_TOL = 1e-8


class Objective(str, Enum):
    ENTROPY = "entropy"          # maximize process entropy
    FEASIBILITY = "feasibility"  # no objective; used with an entropy floor
    MIN_TIME = "min_time"        # minimize expected time spent in given states


@dataclass(frozen=True)
class SideConstraints:
    """Optional rows appended to the base program.

    gamma: cap on total expected residence time outside C.
    ell: entropy floor in bits (combine with Objective.FEASIBILITY).
    reach: (subset of C, beta) forcing total reach probability >= beta.
    positive: (state in C, eps) forcing lambda(state) >= eps.
    """

    gamma: float | None = None
    ell: float | None = None
    reach: tuple[frozenset[int], float] | None = None
    positive: tuple[int, float] | None = None


@dataclass(frozen=True)
class EntropyProgram:
    """Assembled program over an already-absorbed model."""

    mdp: Mdp
    absorbed: frozenset[int]
    objective: Objective
    side: SideConstraints
    min_time_states: frozenset[int] = frozenset()
    # variable layout, filled by build_program
    sa_index: dict[tuple[int, int], int] = field(default_factory=dict)
    c_index: dict[int, int] = field(default_factory=dict)
    terms: tuple[tuple[int, int], ...] = ()

    @property
    def n_sa(self) -> int:
        return len(self.sa_index)

    @property
    def n_c(self) -> int:
        return len(self.c_index)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def n_vars(self) -> int:
        return self.n_sa + self.n_c + (self.n_terms if self.objective is not Objective.MIN_TIME else 0)

    def term_index(self, j: int) -> int:
        return self.n_sa + self.n_c + j

    def eta_coefficients(self, s: int, t: int) -> dict[tuple[int, int], float]:
        """Linear form of eta(s, t) in the lambda(s, a) variables."""
        return {
            (s, a): self.mdp.trans[s][a][t]
            for a in range(self.mdp.n_actions(s))
            if self.mdp.trans[s][a].get(t, 0.0) > 0.0
        }


def build_program(
    mdp: Mdp,
    absorbed: frozenset[int] | set[int],
    objective: Objective = Objective.ENTROPY,
    side: SideConstraints = SideConstraints(),
    min_time_states: frozenset[int] | set[int] = frozenset(),
) -> EntropyProgram:
    """Lay out variables and terms for the given absorbed model.

    ``absorbed`` must already be absorbing in ``mdp`` (every action a
    self-loop); callers absorb end components first.
    """
    absorbed = frozenset(absorbed)
    for s in absorbed:
        for a in range(mdp.n_actions(s)):
            if mdp.trans[s][a].get(s, 0.0) != 1.0:
                raise InvalidModelError(
                    f"state {mdp.states[s]} is declared absorbed but has a non-self-loop action"
                )
    if side.ell is not None and objective is not Objective.FEASIBILITY:
        raise InvalidModelError("an entropy floor requires the feasibility objective")
    if objective is Objective.MIN_TIME and side.ell is not None:
        raise InvalidModelError("min-time objective cannot carry an entropy floor")
    if side.gamma is not None and side.gamma < 0:
        raise InvalidModelError("gamma must be nonnegative")
    if side.reach is not None:
        subset, beta = side.reach
        if not frozenset(subset) <= absorbed:
            raise InvalidModelError("reach constraint must target absorbed states")
        if not 0 < beta <= 1 + 1e-9:
            raise InvalidModelError("beta must lie in (0, 1]")
    if side.positive is not None and side.positive[0] not in absorbed:
        raise InvalidModelError("positivity floor must target an absorbed state")
    if mdp.initial in absorbed and objective is Objective.ENTROPY:
        # trivially zero-entropy program; still valid, handled by the solver
        pass

    free = [s for s in range(mdp.n_states) if s not in absorbed]
    sa_index: dict[tuple[int, int], int] = {}
    for s in free:
        for a in range(mdp.n_actions(s)):
            sa_index[(s, a)] = len(sa_index)
    c_index = {s: len(sa_index) + i for i, s in enumerate(sorted(absorbed))}
    terms: list[tuple[int, int]] = []
    if objective is not Objective.MIN_TIME:
        for s in free:
            targets = sorted({t for a in range(mdp.n_actions(s)) for t in mdp.succ(s, a)})
            terms.extend((s, t) for t in targets)
    return EntropyProgram(
        mdp=mdp,
        absorbed=absorbed,
        objective=objective,
        side=side,
        min_time_states=frozenset(min_time_states),
        sa_index=sa_index,
        c_index=c_index,
        terms=tuple(terms),
    )


# --------------------------------------------------------------------------
# conic assembly


@dataclass(frozen=True)
class ConicData:
    """`min q.x  s.t.  A x + s = b` with s in Zero x Nonneg x Exp^n_exp."""

    q: np.ndarray
    a: sp.csc_matrix
    b: np.ndarray
    m_eq: int
    m_ineq: int
    n_exp: int


def assemble(program: EntropyProgram) -> ConicData:
    p = program
    mdp = p.mdp
    n = p.n_vars
    rows: list[tuple[int, int, float]] = []  # (row, col, value)
    b: list[float] = []
    r = 0

    def add(row: int, col: int, val: float):
        rows.append((row, col, val))

    # flow balance (zero cone): outflow - inflow = alpha
    free = [s for s in range(mdp.n_states) if s not in p.absorbed]
    inflow: dict[int, list[tuple[int, float]]] = {s: [] for s in range(mdp.n_states)}
    for (s, a), col in p.sa_index.items():
        for t, prob in mdp.trans[s][a].items():
            if prob > 0:
                inflow[t].append((col, prob))
    for s in free:
        for a in range(mdp.n_actions(s)):
            add(r, p.sa_index[(s, a)], 1.0)
        for col, prob in inflow[s]:
            add(r, col, -prob)
        b.append(1.0 if s == mdp.initial else 0.0)
        r += 1
    for s in sorted(p.absorbed):
        add(r, p.c_index[s], 1.0)
        for col, prob in inflow[s]:
            add(r, col, -prob)
        b.append(1.0 if s == mdp.initial else 0.0)
        r += 1
    m_eq = r

    # nonnegativity and side rows (nonneg cone): s = b - A x >= 0
    for col in range(p.n_sa + p.n_c):
        add(r, col, -1.0)
        b.append(0.0)
        r += 1
    if p.side.gamma is not None:
        for col in p.sa_index.values():
            add(r, col, 1.0)
        b.append(p.side.gamma)
        r += 1
    if p.side.reach is not None:
        subset, beta = p.side.reach
        for s in subset:
            add(r, p.c_index[s], -1.0)
        b.append(-beta)
        r += 1
    if p.side.ell is not None:
        for j in range(p.n_terms):
            add(r, p.term_index(j), -1.0)
        b.append(-p.side.ell * LN2)
        r += 1
    if p.side.positive is not None:
        s, eps = p.side.positive
        add(r, p.c_index[s], -1.0)
        b.append(-eps)
        r += 1
    m_ineq = r - m_eq

    # exponential cones: slack = (t_j, eta_j, nu_j)
    n_exp = 0
    if p.objective is not Objective.MIN_TIME:
        for j, (s, t) in enumerate(p.terms):
            add(r, p.term_index(j), -1.0)
            b.append(0.0)
            r += 1
            for (ss, a), coeff in p.eta_coefficients(s, t).items():
                add(r, p.sa_index[(ss, a)], -coeff)
            b.append(0.0)
            r += 1
            for a in range(mdp.n_actions(s)):
                add(r, p.sa_index[(s, a)], -1.0)
            b.append(0.0)
            r += 1
            n_exp += 1

    q = np.zeros(n)
    if p.objective is Objective.ENTROPY:
        for j in range(p.n_terms):
            q[p.term_index(j)] = -1.0  # maximize sum of hypograph scalars (nats)
    elif p.objective is Objective.MIN_TIME:
        for s in p.min_time_states:
            if s in p.absorbed:
                continue
            for a in range(mdp.n_actions(s)):
                q[p.sa_index[(s, a)]] = 1.0

    i, j_, v = zip(*rows) if rows else ((), (), ())
    a_mat = sp.csc_matrix((v, (i, j_)), shape=(r, n))
    return ConicData(q=q, a=a_mat, b=np.array(b), m_eq=m_eq, m_ineq=m_ineq, n_exp=n_exp)


# --------------------------------------------------------------------------
# backends


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max-iterations"


@dataclass(frozen=True)
class RawSolution:
    status: SolveStatus
    x: np.ndarray | None
    obj: float
    gap: float
    backend: str
    iterations: int


def _solve_clarabel(data: ConicData, tol: float, max_iter: int) -> RawSolution:
    import clarabel

    cones = []
    if data.m_eq:
        cones.append(clarabel.ZeroConeT(data.m_eq))
    if data.m_ineq:
        cones.append(clarabel.NonnegativeConeT(data.m_ineq))
    cones.extend(clarabel.ExponentialConeT() for _ in range(data.n_exp))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    n = data.q.shape[0]
    p_mat = sp.csc_matrix((n, n))
    solver = clarabel.DefaultSolver(p_mat, data.q, data.a, data.b, cones, settings)
    sol = solver.solve()
    name = str(sol.status)
    if name in ("Solved", "AlmostSolved"):
        status = SolveStatus.OPTIMAL
    elif name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = SolveStatus.INFEASIBLE
    elif name in ("DualInfeasible", "AlmostDualInfeasible"):
        status = SolveStatus.UNBOUNDED
    elif name in ("MaxIterations", "MaxTime", "InsufficientProgress"):
        status = SolveStatus.MAX_ITERATIONS
    else:
        raise SolverError(f"clarabel returned {name}")
    x = np.asarray(sol.x) if sol.x is not None and len(sol.x) else None
    gap = float(abs(sol.obj_val - sol.obj_val_dual)) if status is SolveStatus.OPTIMAL else math.inf
    return RawSolution(status, x, float(sol.obj_val), gap, "clarabel", int(sol.iterations))


def _solve_scs(data: ConicData, tol: float, max_iter: int) -> RawSolution:
    import scs

    cone = {"z": data.m_eq, "l": data.m_ineq, "ep": data.n_exp}
    payload = {"A": data.a, "b": data.b, "c": data.q}
    solver = scs.SCS(
        payload, cone, eps_abs=tol, eps_rel=tol, max_iters=max_iter, verbose=False
    )
    out = solver.solve()
    status = out["info"]["status"].lower()
    if "solved" in status and "infeasible" not in status:
        st = SolveStatus.OPTIMAL
    elif "infeasible" in status:
        st = SolveStatus.INFEASIBLE
    elif "unbounded" in status:
        st = SolveStatus.UNBOUNDED
    else:
        st = SolveStatus.MAX_ITERATIONS
    gap = float(abs(out["info"].get("gap", math.inf)))
    return RawSolution(
        st, out.get("x"), float(out["info"].get("pobj", math.nan)), gap, "scs",
        int(out["info"].get("iter", -1)),
    )


_BACKENDS = {"clarabel": _solve_clarabel, "scs": _solve_scs}


@dataclass(frozen=True)
class SolutionVector:
    """Solved program: occupancy values, objective, and solver certificates."""

    status: SolveStatus
    objective_bits: float
    lam_sa: dict[tuple[int, int], float]
    lam_c: dict[int, float]
    hypograph: tuple[float, ...]
    gap: float
    max_balance_residual: float
    backend: str
    iterations: int

    def xi(self, s: int, mdp_n_actions: int) -> float:
        return sum(self.lam_sa.get((s, a), 0.0) for a in range(mdp_n_actions))


def recompute_objective_bits(program: EntropyProgram, lam_sa: dict[tuple[int, int], float]) -> float:
    """Evaluate the entropy objective directly from occupancy values."""
    total = 0.0
    mdp = program.mdp
    for s, t in program.terms:
        eta = sum(
            lam_sa.get((s, a), 0.0) * mdp.trans[s][a].get(t, 0.0)
            for a in range(mdp.n_actions(s))
        )
        nu = sum(lam_sa.get((s, a), 0.0) for a in range(mdp.n_actions(s)))
        if eta > 0.0 and nu > 0.0:
            total -= eta * math.log2(eta / nu)
    return total


def _balance_residual(program: EntropyProgram, lam_sa, lam_c) -> float:
    mdp = program.mdp
    inflow = [0.0] * mdp.n_states
    for (s, a), val in lam_sa.items():
        for t, prob in mdp.trans[s][a].items():
            inflow[t] += val * prob
    worst = 0.0
    for s in range(mdp.n_states):
        alpha = 1.0 if s == mdp.initial else 0.0
        if s in program.absorbed:
            out = lam_c.get(s, 0.0)
        else:
            out = sum(lam_sa.get((s, a), 0.0) for a in range(mdp.n_actions(s)))
        worst = max(worst, abs(out - inflow[s] - alpha))
    return worst


def solve_program(
    program: EntropyProgram,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200_000,
    backend: str | None = None,
) -> SolutionVector:
    """Solve the assembled cone program.

    Status ``optimal`` comes with primal-dual gap and flow-balance residuals;
    ``unbounded``/``infeasible`` carry the backend's certificate judgement.
    ``max-iterations`` returns the best iterate found.
    """
    name = backend or os.environ.get("MAXENT_SOLVER", "clarabel")
    if name not in _BACKENDS:
        raise InvalidModelError(f"unknown solver backend {name!r}")
    data = assemble(program)
    max_iter_eff = max_iter if name == "scs" else min(max_iter, 500)
    raw = _BACKENDS[name](data, tol, max_iter_eff)

    lam_sa: dict[tuple[int, int], float] = {}
    lam_c: dict[int, float] = {}
    hypo: tuple[float, ...] = ()
    objective_bits = math.nan
    residual = math.inf
    if raw.x is not None and raw.status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITERATIONS):
        x = np.asarray(raw.x, dtype=float)
        lam_sa = {key: max(0.0, float(x[col])) for key, col in program.sa_index.items()}
        lam_c = {s: max(0.0, float(x[col])) for s, col in program.c_index.items()}
        if program.objective is not Objective.MIN_TIME:
            hypo = tuple(float(x[program.term_index(j)]) for j in range(program.n_terms))
        if program.objective is Objective.ENTROPY:
            objective_bits = -raw.obj / LN2
        elif program.objective is Objective.MIN_TIME:
            objective_bits = raw.obj  # expected time, not bits; kept in one slot
        else:
            objective_bits = recompute_objective_bits(program, lam_sa)
        residual = _balance_residual(program, lam_sa, lam_c)
    return SolutionVector(
        status=raw.status,
        objective_bits=objective_bits,
        lam_sa=lam_sa,
        lam_c=lam_c,
        hypograph=hypo,
        gap=raw.gap,
        max_balance_residual=residual,
        backend=raw.backend,
        iterations=raw.iterations,
    )

"""Entropy of induced chains and the finite/infinite/unbounded classifier.

All entropies are in bits (base-2 logarithms throughout). A chain's process
entropy is the residence-weighted sum of local entropies over transient
states, and is infinite exactly when some reachable recurrent state is
stochastic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EnumerationBudgetError, InvalidModelError
from .graph import (
    bottom_strongly_connected_components,
    maximal_end_components,
    reachable_from,
)
from .model import MarkovChain, Mdp

#: Above this many transient states, switch from dense LU to a sparse solve.
DENSE_LIMIT = 2000
#: Residual tolerance for the residence-time linear system.
RESIDUAL_TOL = 1e-10


def _xlog2x(p: float) -> float:
    return 0.0 if p <= 0.0 else p * math.log2(p)


def local_entropy(chain: MarkovChain, s: int) -> float:
    """Shannon entropy of the outgoing distribution of one state, in bits."""
    return -sum(_xlog2x(p) for p in chain.rows[s].values())


class EntropyClassTag(str, Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class EntropyClass:
    """Classifier verdict plus the structural witness backing it.

    ``witness_state`` is set for the infinite case (a MEC state whose retained
    actions reach more than one successor); ``witness_mec`` is set for the
    unbounded case (index of a MEC that is not bottom strongly connected).
    """

    tag: EntropyClassTag
    witness_state: int | None = None
    witness_mec: int | None = None

    @property
    def is_finite(self) -> bool:
        return self.tag is EntropyClassTag.FINITE


@dataclass(frozen=True)
class ResidenceVector:
    """Expected visit counts per state. ``xi[s]`` is finite for transient
    states, ``inf`` for reachable recurrent states, and 0 exactly for
    unreachable states."""

    xi: tuple[float, ...]

    def __getitem__(self, s: int) -> float:
        return self.xi[s]


def _transient_reachable(chain: MarkovChain) -> tuple[set[int], set[int]]:
    """(reachable transient states, reachable recurrent states)."""
    bsccs, transient = bottom_strongly_connected_components(chain)
    reach = reachable_from(chain.digraph(), chain.initial)
    recurrent = set().union(*bsccs) if bsccs else set()
    return set(transient) & reach, recurrent & reach


def residence_times(chain: MarkovChain) -> ResidenceVector:
    """Solve the flow balance system xi = alpha + Q^T xi over the reachable
    transient states (Q the transient submatrix, alpha the initial-state
    indicator); recurrent reachable states get inf, unreachable states 0.
    """
    trans_r, rec_r = _transient_reachable(chain)
    xi = [0.0] * chain.n_states
    for s in rec_r:
        xi[s] = math.inf
    order = sorted(trans_r)
    if order:
        pos = {s: i for i, s in enumerate(order)}
        m = len(order)
        alpha = np.zeros(m)
        if chain.initial in pos:
            alpha[pos[chain.initial]] = 1.0
        rows, cols, vals = [], [], []
        for s in order:
            for t, p in chain.rows[s].items():
                if t in pos and p > 0:
                    # contribution of xi[s] * P(s, t) to the balance at t
                    rows.append(pos[t])
                    cols.append(pos[s])
                    vals.append(p)
        qt = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
        system = sp.identity(m, format="csr") - qt
        if m <= DENSE_LIMIT:
            sol = np.linalg.solve(system.toarray(), alpha)
        else:
            sol = spla.spsolve(system.tocsc(), alpha)
            # one step of iterative refinement
            sol = sol + spla.spsolve(system.tocsc(), alpha - system @ sol)
        resid = np.abs(system @ sol - alpha).max()
        if not np.isfinite(sol).all() or resid > RESIDUAL_TOL * max(1.0, np.abs(sol).max()):
            raise InvalidModelError(
                "residence-time system is singular; transient restriction is inconsistent"
            )
        for s in order:
            xi[s] = float(max(0.0, sol[pos[s]]))
    return ResidenceVector(tuple(xi))


def chain_entropy(chain: MarkovChain) -> float:
    """Process entropy of the chain in bits, or ``inf``.

    Infinite exactly when a reachable recurrent state has positive local
    entropy; otherwise the residence-weighted sum of local entropies over the
    reachable transient states.
    """
    trans_r, rec_r = _transient_reachable(chain)
    for s in rec_r:
        if len(chain.succ(s)) > 1:
            return math.inf
    if not trans_r:
        return 0.0
    xi = residence_times(chain)
    return sum(xi[s] * local_entropy(chain, s) for s in trans_r)


def classify_max_entropy(mdp: Mdp) -> EntropyClass:
    """Trichotomy check on MEC structure.

    Priority order: a MEC state whose retained actions cover more than one
    successor makes the supremum infinite (and attainable); otherwise any MEC
    that is not bottom strongly connected makes it unbounded (finite for every
    policy, but no maximum); otherwise the maximum is finite and attained.
    """
    dec = maximal_end_components(mdp)
    unbounded_witness: int | None = None
    for i, (states, retained) in enumerate(dec.mecs):
        for s in sorted(states):
            succ_union: set[int] = set()
            for a in retained[s]:
                succ_union |= mdp.succ(s, a)
            if len(succ_union) > 1:
                return EntropyClass(EntropyClassTag.INFINITE, witness_state=s)
            if len(retained[s]) < mdp.n_actions(s) and unbounded_witness is None:
                unbounded_witness = i
    if unbounded_witness is not None:
        return EntropyClass(EntropyClassTag.UNBOUNDED, witness_mec=unbounded_witness)
    return EntropyClass(EntropyClassTag.FINITE)


@dataclass(frozen=True)
class PathEntropyEstimate:
    """Best-first enumeration result.

    ``entropy_bits`` sums -p log2 p over fully absorbed path fragments;
    ``residual_mass`` is the probability mass still on the frontier when the
    enumeration stopped; ``frontier_entropy_bits`` is -p log2 p summed over
    frontier prefixes (part of any truncation-error bound); ``n_paths`` counts
    absorbed fragments.
    """

    entropy_bits: float
    residual_mass: float
    frontier_entropy_bits: float
    n_paths: int


def enumerate_path_entropy(
    chain: MarkovChain,
    mass_cutoff: float,
    node_cap: int = 10**7,
) -> PathEntropyEstimate:
    """Entropy of the distribution over path fragments that first hit a BSCC.

    Expands prefixes best-first (largest probability first) from the initial
    state until the un-absorbed prefix mass drops below ``mass_cutoff``.
    Absorbed mass plus residual always accounts for the full unit of
    probability (up to float round-off).
    """
    if not 0 < mass_cutoff < 1:
        raise InvalidModelError("mass_cutoff must be in (0, 1)")
    bsccs, _ = bottom_strongly_connected_components(chain)
    bottom = set().union(*bsccs) if bsccs else set()
    if not bottom & reachable_from(chain.digraph(), chain.initial):
        raise InvalidModelError("no BSCC reachable; enumeration would not terminate")

    entropy = 0.0
    absorbed_mass = 0.0
    frontier_mass = 0.0
    n_paths = 0
    # heap of (-probability, tiebreak, state); the prefix itself is irrelevant,
    # only its probability and endpoint matter.
    tie = 0
    frontier: list[tuple[float, int, int]] = []

    def push(p: float, s: int):
        nonlocal tie, entropy, absorbed_mass, frontier_mass, n_paths
        if s in bottom:
            entropy -= _xlog2x(p)
            absorbed_mass += p
            n_paths += 1
        else:
            heapq.heappush(frontier, (-p, tie, s))
            frontier_mass += p
            tie += 1

    push(1.0, chain.initial)
    expanded = 0
    while frontier and frontier_mass >= mass_cutoff:
        negp, _, s = heapq.heappop(frontier)
        p = -negp
        frontier_mass -= p
        expanded += 1
        if expanded > node_cap:
            frontier_mass += p  # put the popped mass back before reporting
            raise EnumerationBudgetError(
                f"exceeded node cap {node_cap} with residual mass {frontier_mass:.3e}"
            )
        for t, q in chain.rows[s].items():
            if q > 0:
                push(p * q, t)
    residual = -sum(item[0] for item in frontier)
    frontier_entropy = -sum(_xlog2x(-item[0]) for item in frontier)
    return PathEntropyEstimate(
        entropy_bits=entropy,
        residual_mass=max(0.0, residual),
        frontier_entropy_bits=max(0.0, frontier_entropy),
        n_paths=n_paths,
    )

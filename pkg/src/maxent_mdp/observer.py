"""Predictability metrics: per-state yes-no probe counts and their
residence-weighted total.

An observer who knows the transition structure identifies the successor taken
at a state by asking yes-no questions, probing candidates from most to least
probable. With successor probabilities sorted decreasing as p_1 >= ... >= p_n,
the expected probe count is

    p_1 + 2 p_2 + ... + (n-1) p_{n-1} + (n-1) p_n

(the last two candidates share a probe). Deterministic states need no probe.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .entropy import residence_times
from .model import MarkovChain


def probe_count(chain: MarkovChain, s: int) -> float:
    """Expected number of yes-no probes to pin down the successor of s."""
    probs = sorted(
        ((p, t) for t, p in chain.rows[s].items() if p > 0),
        key=lambda pt: (-pt[0], pt[1]),
    )
    n = len(probs)
    if n <= 1:
        return 0.0
    total = 0.0
    for i, (p, _) in enumerate(probs, start=1):
        total += min(i, n - 1) * p
    return total


def huffman_expected_depth(chain: MarkovChain, s: int) -> float:
    """Expected codeword length of an exact Huffman code over the successor
    distribution; diagnostic alternative to :func:`probe_count`."""
    probs = sorted(p for p in chain.rows[s].values() if p > 0)
    if len(probs) <= 1:
        return 0.0
    heap = [(p, 0.0) for p in probs]  # (mass, accumulated expected depth)
    heapq.heapify(heap)
    while len(heap) > 1:
        p1, d1 = heapq.heappop(heap)
        p2, d2 = heapq.heappop(heap)
        heapq.heappush(heap, (p1 + p2, d1 + d2 + p1 + p2))
    return heap[0][1]


@dataclass(frozen=True)
class ObserverReport:
    """Per-state probe counts, residence times, and the expected total number
    of observations needed to identify a full path."""

    upsilon: tuple[float, ...]
    xi: tuple[float, ...]
    o_avg: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.o_avg)


def expected_observations(chain: MarkovChain) -> ObserverReport:
    """Residence-weighted probe total; infinite iff some stochastic state is
    recurrent (it then demands probes forever)."""
    xi = residence_times(chain)
    upsilon = tuple(probe_count(chain, s) for s in range(chain.n_states))
    total = 0.0
    for s in range(chain.n_states):
        if upsilon[s] == 0.0:
            continue
        if math.isinf(xi[s]):
            total = math.inf
            break
        total += xi[s] * upsilon[s]
    return ObserverReport(upsilon=upsilon, xi=tuple(xi.xi), o_avg=total)

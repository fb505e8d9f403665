"""Monte-Carlo trajectory sampling for induced chains.

Sampling uses numpy's Philox counter-based generator with an explicit seed,
so a fixed seed reproduces runs bit-for-bit across platforms. Each run starts
at the initial state and stops on entering a bottom strongly connected
component (absorption) or after ``max_steps``.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .entropy import _xlog2x
from .errors import InvalidModelError
from .graph import bottom_strongly_connected_components
from .model import MarkovChain

RNG_NAME = "philox"


@dataclass(frozen=True)
class TrajectoryStats:
    """Empirical summary of a batch of sampled runs."""

    n_runs: int
    seed: int
    rng: str
    absorbed_runs: int
    mean_absorption_steps: float
    bscc_frequencies: dict[int, float]
    path_counts: dict[tuple[int, ...], int]
    empirical_path_entropy_bits: float
    trajectories: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def absorbed_fraction(self) -> float:
        return self.absorbed_runs / self.n_runs if self.n_runs else 0.0

    def path_frequency(self, path: tuple[int, ...]) -> float:
        return self.path_counts.get(path, 0) / self.n_runs if self.n_runs else 0.0


def simulate(
    chain: MarkovChain,
    n_runs: int,
    max_steps: int = 10_000,
    seed: int = 0,
    keep_trajectories: int = 0,
) -> TrajectoryStats:
    """Sample ``n_runs`` absorption runs.

    The empirical path entropy is the plug-in estimate over absorbed run
    prefixes (runs truncated by ``max_steps`` are excluded from it but
    reported in the absorption counts). ``keep_trajectories`` bounds how many
    raw trajectories are retained in the result.
    """
    if n_runs < 1:
        raise InvalidModelError("n_runs must be at least 1")
    bsccs, _ = bottom_strongly_connected_components(chain)
    bscc_of: dict[int, int] = {}
    for i, comp in enumerate(bsccs):
        for s in comp:
            bscc_of[s] = i

    targets: list[tuple[int, ...]] = []
    cums: list[tuple[float, ...]] = []
    for s in range(chain.n_states):
        pairs = sorted(chain.rows[s].items())
        ts = tuple(t for t, _ in pairs)
        acc = []
        run = 0.0
        for _, p in pairs:
            run += p
            acc.append(run)
        targets.append(ts)
        cums.append(tuple(acc))

    rng = np.random.Generator(np.random.Philox(seed))
    path_counts: dict[tuple[int, ...], int] = {}
    hits: dict[int, int] = {}
    kept: list[tuple[int, ...]] = []
    absorbed = 0
    total_steps = 0

    for _ in range(n_runs):
        s = chain.initial
        path = [s]
        for _ in range(max_steps):
            if s in bscc_of:
                break
            u = rng.random()
            i = bisect_left(cums[s], u)
            i = min(i, len(targets[s]) - 1)
            s = targets[s][i]
            path.append(s)
        if s in bscc_of:
            absorbed += 1
            total_steps += len(path) - 1
            hits[bscc_of[s]] = hits.get(bscc_of[s], 0) + 1
            key = tuple(path)
            path_counts[key] = path_counts.get(key, 0) + 1
        if len(kept) < keep_trajectories:
            kept.append(tuple(path))

    entropy = 0.0
    if absorbed:
        for count in path_counts.values():
            entropy -= _xlog2x(count / absorbed)
    return TrajectoryStats(
        n_runs=n_runs,
        seed=seed,
        rng=RNG_NAME,
        absorbed_runs=absorbed,
        mean_absorption_steps=(total_steps / absorbed) if absorbed else math.nan,
        bscc_frequencies={i: c / n_runs for i, c in sorted(hits.items())},
        path_counts=path_counts,
        empirical_path_entropy_bits=entropy,
        trajectories=tuple(kept),
    )

import numpy as np
import pytest

from maxent_mdp import GridWorldSpec, MarkovChain, Mdp, build_gridworld


@pytest.fixture
def fork():
    """Initial state forks into two absorbing sinks; uniform is optimal."""
    return Mdp(
        states=("s0", "s1", "s2"),
        initial=0,
        actions=(("a1", "a2"), ("a1",), ("a1",)),
        trans=(({1: 1.0}, {2: 1.0}), ({1: 1.0},), ({2: 1.0},)),
    )


@pytest.fixture
def biased_fork():
    """One arm loops back with probability 1/3 before committing."""
    return Mdp(
        states=("s0", "s1", "s2"),
        initial=0,
        actions=(("a1", "a2"), ("a1",), ("a1",)),
        trans=(({0: 1 / 3, 1: 2 / 3}, {2: 1.0}), ({1: 1.0},), ({2: 1.0},)),
    )


@pytest.fixture
def delay_exit():
    """Self-loop action plus an exit: unbounded maximum entropy."""
    return Mdp(
        states=("s0", "s1"),
        initial=0,
        actions=(("a1", "a2"), ("a1",)),
        trans=(({0: 1.0}, {1: 1.0}), ({1: 1.0},)),
    )


@pytest.fixture
def toggle():
    """Two states that can hold or swap: infinite maximum entropy."""
    return Mdp(
        states=("s0", "s1"),
        initial=0,
        actions=(("a1", "a2"), ("a1", "a2")),
        trans=(({0: 1.0}, {1: 1.0}), ({1: 1.0}, {0: 1.0})),
    )


@pytest.fixture
def diamond():
    """Three deterministic routes into two sinks; optimum is uniform over paths."""
    return Mdp(
        states=("s0", "s1", "s2", "s3", "s4"),
        initial=0,
        actions=(("a1", "a2"), ("a1", "a2"), ("a1",), ("a1",), ("a1",)),
        trans=(
            ({1: 1.0}, {2: 1.0}),
            ({3: 1.0}, {4: 1.0}),
            ({4: 1.0},),
            ({3: 1.0},),
            ({4: 1.0},),
        ),
        ap=("goal",),
        labels=(frozenset(), frozenset(), frozenset(), frozenset({"goal"}), frozenset()),
    )


@pytest.fixture
def diamond_chain():
    """The chain the uniform-over-paths policy induces on the diamond."""
    return MarkovChain(
        states=("s0", "s1", "s2", "s3", "s4"),
        initial=0,
        rows=({1: 2 / 3, 2: 1 / 3}, {3: 0.5, 4: 0.5}, {4: 1.0}, {3: 1.0}, {4: 1.0}),
    )


def delay_chain(delta: float) -> MarkovChain:
    rows = ({0: 1.0 - delta, 1: delta} if delta > 0 else {0: 1.0}, {1: 1.0})
    return MarkovChain(states=("s0", "s1"), initial=0, rows=rows)


BENCH_B_CELLS = frozenset({(4, 3), (5, 3), (6, 3), (4, 7), (5, 7), (6, 7)})
BENCH_T_CELL = (10, 5)


@pytest.fixture(scope="session")
def bench_grid_spec():
    """11x11 reach/avoid benchmark: start mid-left, target mid-right, two
    three-cell hazard rows."""
    return GridWorldSpec(
        width=11,
        height=11,
        initial=(0, 5),
        absorbing=BENCH_B_CELLS | {BENCH_T_CELL},
        labels={"T": frozenset({BENCH_T_CELL}), "B": BENCH_B_CELLS},
    )


@pytest.fixture(scope="session")
def bench_grid(bench_grid_spec):
    return build_gridworld(bench_grid_spec)


def random_mdp(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    branching: int = 2,
    ap: tuple[str, ...] = (),
    labels=None,
) -> Mdp:
    """Seeded random model; every state reachable by construction (state i > 0
    gets an incoming edge from some earlier state)."""
    trans = []
    incoming = [True] + [False] * (n_states - 1)
    for s in range(n_states):
        per = []
        for _ in range(n_actions):
            k = int(rng.integers(1, branching + 1))
            targets = rng.choice(n_states, size=min(k, n_states), replace=False)
            probs = rng.dirichlet(np.ones(len(targets)))
            per.append({int(t): float(p) for t, p in zip(targets, probs) if p > 0})
        trans.append(per)
    # wire unreached states into the graph
    for t in range(1, n_states):
        if not any(t in dist for s in range(t) for dist in trans[s]):
            s = int(rng.integers(0, t))
            a = int(rng.integers(0, n_actions))
            dist = trans[s][a]
            w = 0.5
            dist = {u: p * (1 - w) for u, p in dist.items()}
            dist[t] = dist.get(t, 0.0) + w
            trans[s][a] = dist
    return Mdp(
        states=tuple(f"s{i}" for i in range(n_states)),
        initial=0,
        actions=tuple(tuple(f"a{j}" for j in range(n_actions)) for _ in range(n_states)),
        trans=tuple(tuple(per) for per in trans),
        ap=ap,
        labels=labels,
    )


def random_policy(rng: np.random.Generator, mdp: Mdp):
    from maxent_mdp import StationaryPolicy

    rows = []
    for s in range(mdp.n_states):
        w = rng.dirichlet(np.ones(mdp.n_actions(s)))
        rows.append(tuple(float(x) for x in w))
    return StationaryPolicy(tuple(rows))

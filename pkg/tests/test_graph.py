import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxent_mdp import (
    Mdp,
    StationaryPolicy,
    bottom_strongly_connected_components,
    induce_chain,
    is_bsc_mec,
    max_reach_probability,
    maximal_end_components,
    partition_by_reachability,
    strongly_connected_components,
)
from maxent_mdp.graph import chain_reach_probability

from conftest import random_mdp, random_policy


class TestScc:
    def test_two_cycle(self):
        assert strongly_connected_components([{1}, {0}]) == [[0, 1]]

    def test_dag_three_singletons(self):
        sccs = strongly_connected_components([{1}, {2}, set()])
        assert sorted(sccs) == [[0], [1], [2]]

    def test_reverse_topological_order(self):
        sccs = strongly_connected_components([{1}, {2}, set()])
        # sinks come first
        assert sccs[0] == [2] and sccs[-1] == [0]

    def test_toggle_full_digraph_one_component(self, toggle):
        assert strongly_connected_components(toggle.digraph()) == [[0, 1]]


class TestMec:
    def test_diamond_two_singleton_mecs(self, diamond):
        dec = maximal_end_components(diamond)
        found = {(states, tuple(sorted(retained.items()))) for states, retained in dec.mecs}
        assert {frozenset({3}), frozenset({4})} == {states for states, _ in dec.mecs}
        for states, retained in dec.mecs:
            assert all(acts == (0,) for acts in retained.values())
        assert dec.membership[0] is None and dec.membership[3] is not None

    def test_toggle_single_mec_all_actions(self, toggle):
        dec = maximal_end_components(toggle)
        assert len(dec.mecs) == 1
        states, retained = dec.mecs[0]
        assert states == frozenset({0, 1})
        assert retained[0] == (0, 1) and retained[1] == (0, 1)

    def test_delay_exit_two_mecs(self, delay_exit):
        dec = maximal_end_components(delay_exit)
        assert {states for states, _ in dec.mecs} == {frozenset({0}), frozenset({1})}
        retained = dict(dec.mecs[dec.membership[0]][1])
        assert retained[0] == (0,)  # only the self-loop action stays inside

    def test_single_absorbing_state(self):
        mdp = Mdp(states=("s",), initial=0, actions=(("a",),), trans=(({0: 1.0},),))
        dec = maximal_end_components(mdp)
        assert len(dec.mecs) == 1

    def test_transient_singleton_is_not_a_mec(self, fork):
        dec = maximal_end_components(fork)
        assert dec.membership[0] is None

    @given(seed=st.integers(0, 300))
    @settings(max_examples=30, deadline=None)
    def test_idempotent_on_restriction(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)), branching=3)
        dec = maximal_end_components(mdp)
        for states, retained in dec.mecs:
            order = sorted(states)
            remap = {s: i for i, s in enumerate(order)}
            sub = Mdp(
                states=tuple(mdp.states[s] for s in order),
                initial=0,
                actions=tuple(tuple(mdp.actions[s][a] for a in retained[s]) for s in order),
                trans=tuple(
                    tuple(
                        {remap[t]: p for t, p in mdp.trans[s][a].items()}
                        for a in retained[s]
                    )
                    for s in order
                ),
            )
            sub_dec = maximal_end_components(sub)
            assert len(sub_dec.mecs) == 1
            assert sub_dec.mecs[0][0] == frozenset(range(len(order)))

    @given(seed=st.integers(0, 300))
    @settings(max_examples=30, deadline=None)
    def test_membership_unique(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 8)), int(rng.integers(1, 4)), branching=3)
        dec = maximal_end_components(mdp)
        seen = set()
        for states, _ in dec.mecs:
            assert not (states & seen)
            seen |= states


class TestBscFlag:
    def test_delay_exit_initial_mec_not_bsc(self, delay_exit):
        dec = maximal_end_components(delay_exit)
        mec0 = dec.mecs[dec.membership[0]]
        assert not is_bsc_mec(delay_exit, mec0)

    def test_diamond_sinks_are_bsc(self, diamond):
        dec = maximal_end_components(diamond)
        assert all(is_bsc_mec(diamond, mec) for mec in dec.mecs)

    def test_toggle_is_bsc(self, toggle):
        dec = maximal_end_components(toggle)
        assert is_bsc_mec(toggle, dec.mecs[0])


class TestBscc:
    def test_diamond_chain(self, diamond_chain):
        bsccs, transient = bottom_strongly_connected_components(diamond_chain)
        assert sorted(bsccs, key=min) == [frozenset({3}), frozenset({4})]
        assert transient == frozenset({0, 1, 2})

    def test_irreducible_cycle(self):
        from maxent_mdp import MarkovChain

        chain = MarkovChain(states=("a", "b"), initial=0, rows=({1: 1.0}, {0: 1.0}))
        bsccs, transient = bottom_strongly_connected_components(chain)
        assert bsccs == [frozenset({0, 1})]
        assert transient == frozenset()

    def test_absorbing_target(self):
        from maxent_mdp import MarkovChain

        chain = MarkovChain(states=("a", "b"), initial=0, rows=({0: 0.5, 1: 0.5}, {1: 1.0}))
        bsccs, transient = bottom_strongly_connected_components(chain)
        assert bsccs == [frozenset({1})]

    @given(seed=st.integers(0, 300))
    @settings(max_examples=30, deadline=None)
    def test_bsccs_sit_inside_mecs(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)), branching=3)
        dec = maximal_end_components(mdp)
        chain = induce_chain(mdp, random_policy(rng, mdp))
        bsccs, _ = bottom_strongly_connected_components(chain)
        for comp in bsccs:
            indices = {dec.membership[s] for s in comp}
            assert len(indices) == 1 and None not in indices


class TestReachability:
    def test_target_contains_initial(self, diamond):
        assert max_reach_probability(diamond, {0, 3}) == 1.0

    def test_unreachable_target(self, diamond):
        island = Mdp(
            states=("s0", "s1"),
            initial=0,
            actions=(("a",), ("a",)),
            trans=(({0: 1.0},), ({1: 1.0},)),
        )
        assert max_reach_probability(island, {1}) == 0.0

    def test_diamond_target_reachable_surely(self, diamond):
        assert max_reach_probability(diamond, {3}) == pytest.approx(1.0, abs=1e-7)

    def test_probabilistic_ceiling(self):
        # one shot: a1 hits the target half the time, a2 never
        mdp = Mdp(
            states=("s0", "t", "u"),
            initial=0,
            actions=(("a1", "a2"), ("a",), ("a",)),
            trans=(({1: 0.5, 2: 0.5}, {2: 1.0}), ({1: 1.0},), ({2: 1.0},)),
        )
        assert max_reach_probability(mdp, {1}) == pytest.approx(0.5, abs=1e-7)

    @given(seed=st.integers(0, 200))
    @settings(max_examples=25, deadline=None)
    def test_dominates_concrete_policies(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 6)), int(rng.integers(1, 3)), branching=3)
        target = frozenset({int(rng.integers(0, mdp.n_states))})
        best = max_reach_probability(mdp, target)
        for _ in range(5):
            chain = induce_chain(mdp, random_policy(rng, mdp))
            assert best >= chain_reach_probability(chain, target) - 1e-7


class TestPartition:
    def test_everything_reaches(self, fork):
        part = partition_by_reachability(fork, frozenset({1, 2}))
        assert part.zero == frozenset()
        assert part.rest == frozenset({0})

    def test_empty_goal(self, diamond):
        part = partition_by_reachability(diamond, frozenset())
        assert part.zero == frozenset(range(5))

    def test_diamond_split(self, diamond):
        # s2 commits to the right sink, so it cannot reach s3 either
        part = partition_by_reachability(diamond, frozenset({3}))
        assert part.goal == frozenset({3})
        assert part.zero == frozenset({2, 4})
        assert part.rest == frozenset({0, 1})
        # the three sets partition the state space
        assert part.goal | part.zero | part.rest == frozenset(range(5))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxent_mdp import (
    InvalidModelError,
    MarkovChain,
    Mdp,
    PolicyMismatchError,
    StationaryPolicy,
    induce_chain,
    path_prefix_probability,
    validate_mdp,
)

from conftest import random_mdp, random_policy


class TestValidation:
    def test_valid_model(self, fork):
        assert validate_mdp(fork).ok

    def test_substochastic_row_reported(self):
        mdp = Mdp(
            states=("s0", "s1"),
            initial=0,
            actions=(("a1",), ("a1",)),
            trans=(({1: 0.9},), ({1: 1.0},)),
        )
        report = validate_mdp(mdp)
        assert not report.ok
        assert any("row-stochasticity at (s0,a1)" in v for v in report.violations)

    def test_unreachable_state_reported(self):
        mdp = Mdp(
            states=("s0", "s1", "island"),
            initial=0,
            actions=(("a1",), ("a1",), ("a1",)),
            trans=(({1: 1.0},), ({1: 1.0},), ({2: 1.0},)),
        )
        report = validate_mdp(mdp)
        assert [v for v in report.violations if "unreachable state island" in v]

    def test_multiple_violations_all_listed(self):
        mdp = Mdp(
            states=("s0", "s1", "island"),
            initial=0,
            actions=(("a1",), ("a1",), ("a1",)),
            trans=(({1: 0.5},), ({1: 1.0},), ({2: 1.0},)),
        )
        report = validate_mdp(mdp)
        assert len(report.violations) == 2

    def test_structural_errors_raise(self):
        with pytest.raises(InvalidModelError):
            Mdp(states=("s0",), initial=1, actions=(("a",),), trans=(({0: 1.0},),))
        with pytest.raises(InvalidModelError):
            Mdp(states=("s0",), initial=0, actions=((),), trans=((),))
        with pytest.raises(InvalidModelError):
            Mdp(states=("s0",), initial=0, actions=(("a",),), trans=(({3: 1.0},),))


class TestInduceChain:
    def test_mixed_row(self, biased_fork):
        policy = StationaryPolicy(((2 / 3, 1 / 3), (1.0,), (1.0,)))
        chain = induce_chain(biased_fork, policy)
        assert chain.rows[0] == pytest.approx({0: 2 / 9, 1: 4 / 9, 2: 1 / 3})
        assert chain.initial == 0

    def test_deterministic_policy_copies_row(self, biased_fork):
        policy = StationaryPolicy.deterministic(biased_fork)
        chain = induce_chain(biased_fork, policy)
        assert chain.rows[0] == pytest.approx({0: 1 / 3, 1: 2 / 3})

    def test_uniform_over_paths_policy(self, diamond, diamond_chain):
        policy = StationaryPolicy(((2 / 3, 1 / 3), (0.5, 0.5), (1.0,), (1.0,), (1.0,)))
        chain = induce_chain(diamond, policy)
        for s in range(chain.n_states):
            assert chain.rows[s] == pytest.approx(diamond_chain.rows[s])

    def test_labels_preserved(self, diamond):
        chain = induce_chain(diamond, StationaryPolicy.uniform(diamond))
        assert chain.labels == diamond.labels

    def test_policy_shape_mismatch(self, fork, toggle):
        with pytest.raises(PolicyMismatchError):
            induce_chain(fork, StationaryPolicy.uniform(toggle))

    @given(seed=st.integers(0, 500))
    @settings(max_examples=40, deadline=None)
    def test_rows_stochastic(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)), branching=3)
        chain = induce_chain(mdp, random_policy(rng, mdp))
        for row in chain.rows:
            assert sum(row.values()) == pytest.approx(1.0, abs=1e-9)


class TestPathPrefixProbability:
    def test_known_prefixes(self, diamond_chain):
        assert path_prefix_probability(diamond_chain, [0, 1, 3]) == pytest.approx(1 / 3)
        assert path_prefix_probability(diamond_chain, [0, 2, 4]) == pytest.approx(1 / 3)
        assert path_prefix_probability(diamond_chain, [0, 1, 4]) == pytest.approx(1 / 3)

    def test_trivial_prefix(self, diamond_chain):
        assert path_prefix_probability(diamond_chain, [0]) == 1.0

    def test_impossible_step_is_zero(self, diamond_chain):
        assert path_prefix_probability(diamond_chain, [0, 3]) == 0.0
        assert path_prefix_probability(diamond_chain, [0, 3, 1]) == 0.0

    def test_bad_start_raises(self, diamond_chain):
        with pytest.raises(InvalidModelError):
            path_prefix_probability(diamond_chain, [1, 3])
        with pytest.raises(InvalidModelError):
            path_prefix_probability(diamond_chain, [])

    @given(seed=st.integers(0, 500), n=st.integers(1, 4))
    @settings(max_examples=30, deadline=None)
    def test_length_n_prefixes_sum_to_one(self, seed, n):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)))
        chain = induce_chain(mdp, random_policy(rng, mdp))

        total = 0.0
        stack = [([chain.initial], 1.0)]
        while stack:
            prefix, p = stack.pop()
            if len(prefix) == n + 1:
                total += path_prefix_probability(chain, prefix)
                continue
            for t in chain.succ(prefix[-1]):
                stack.append((prefix + [t], p))
        assert total == pytest.approx(1.0, abs=1e-9)


class TestPolicy:
    def test_rows_must_be_distributions(self):
        with pytest.raises(InvalidModelError):
            StationaryPolicy(((0.5, 0.6),))
        with pytest.raises(InvalidModelError):
            StationaryPolicy(((-0.1, 1.1),))

    def test_named_round_trip(self, diamond):
        policy = StationaryPolicy(((2 / 3, 1 / 3), (0.5, 0.5), (1.0,), (1.0,), (1.0,)))
        back = StationaryPolicy.from_named(diamond, policy.as_named(diamond))
        assert back.dist == policy.dist

    def test_from_named_missing_state(self, diamond):
        with pytest.raises(PolicyMismatchError):
            StationaryPolicy.from_named(diamond, {"s0": {"a1": 1.0}})

    def test_from_named_unknown_action(self, fork):
        doc = {"s0": {"zzz": 1.0}, "s1": {"a1": 1.0}, "s2": {"a1": 1.0}}
        with pytest.raises(PolicyMismatchError):
            StationaryPolicy.from_named(fork, doc)


def test_chain_requires_stochastic_rows():
    with pytest.raises(InvalidModelError):
        MarkovChain(states=("a", "b"), initial=0, rows=({1: 0.5}, {1: 1.0}))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxent_mdp import (
    EnumerationBudgetError,
    EntropyClassTag,
    InvalidModelError,
    MarkovChain,
    StationaryPolicy,
    chain_entropy,
    classify_max_entropy,
    enumerate_path_entropy,
    induce_chain,
    local_entropy,
    residence_times,
)

from conftest import delay_chain, random_mdp, random_policy


def closed_form_delay_entropy(delta: float) -> float:
    """Entropy of the hold/exit chain: -((1-d)log(1-d) + d log d) / d."""
    if delta == 0.0:
        return 0.0
    return -((1 - delta) * math.log2(1 - delta) + delta * math.log2(delta)) / delta


class TestLocalEntropy:
    def test_fair_coin(self):
        chain = MarkovChain(("a", "b", "c"), 0, ({1: 0.5, 2: 0.5}, {1: 1.0}, {2: 1.0}))
        assert local_entropy(chain, 0) == pytest.approx(1.0)

    def test_deterministic_row(self):
        chain = MarkovChain(("a", "b"), 0, ({1: 1.0}, {1: 1.0}))
        assert local_entropy(chain, 0) == 0.0

    def test_three_way_row(self):
        chain = MarkovChain(("a", "b", "c"), 0, ({0: 2 / 9, 1: 4 / 9, 2: 1 / 3}, {1: 1.0}, {2: 1.0}))
        expected = -(2 / 9 * math.log2(2 / 9) + 4 / 9 * math.log2(4 / 9) + 1 / 3 * math.log2(1 / 3))
        assert expected == pytest.approx(1.5305, abs=1e-4)
        assert local_entropy(chain, 0) == pytest.approx(expected, abs=1e-12)

    @given(seed=st.integers(0, 300))
    @settings(max_examples=30, deadline=None)
    def test_bounded_by_log_state_count(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 7)), 2, branching=4)
        chain = induce_chain(mdp, random_policy(rng, mdp))
        for s in range(chain.n_states):
            assert 0.0 <= local_entropy(chain, s) <= math.log2(chain.n_states) + 1e-12


class TestResidenceTimes:
    def test_diamond_transients(self, diamond_chain):
        xi = residence_times(diamond_chain)
        assert xi[0] == pytest.approx(1.0)
        assert xi[1] == pytest.approx(2 / 3)
        assert xi[2] == pytest.approx(1 / 3)
        assert math.isinf(xi[3]) and math.isinf(xi[4])

    def test_absorbing_initial(self):
        chain = MarkovChain(("a", "b"), 0, ({0: 1.0}, {0: 1.0}))
        xi = residence_times(chain)
        assert math.isinf(xi[0]) and xi[1] == 0.0

    def test_hold_exit_geometric(self):
        xi = residence_times(delay_chain(0.5))
        assert xi[0] == pytest.approx(2.0)

    def test_unreachable_state_zero(self):
        chain = MarkovChain(("a", "b", "c"), 0, ({1: 1.0}, {1: 1.0}, {2: 1.0}))
        xi = residence_times(chain)
        assert xi[2] == 0.0

    @given(seed=st.integers(0, 300))
    @settings(max_examples=30, deadline=None)
    def test_flow_balance(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 3)), branching=3)
        chain = induce_chain(mdp, random_policy(rng, mdp))
        xi = residence_times(chain)
        transient = [s for s in range(chain.n_states) if math.isfinite(xi[s])]
        for t in transient:
            inflow = sum(
                xi[s] * chain.prob(s, t) for s in transient
            )
            alpha = 1.0 if t == chain.initial else 0.0
            assert xi[t] == pytest.approx(inflow + alpha, abs=1e-8)


class TestChainEntropy:
    def test_diamond_uniform_paths(self, diamond_chain):
        assert chain_entropy(diamond_chain) == pytest.approx(math.log2(3), abs=1e-12)

    def test_deterministic_chain_zero(self):
        chain = MarkovChain(("a", "b"), 0, ({1: 1.0}, {1: 1.0}))
        assert chain_entropy(chain) == 0.0

    def test_hold_exit_half(self):
        assert chain_entropy(delay_chain(0.5)) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("delta", [0.5, 0.25, 0.1])
    def test_matches_closed_form(self, delta):
        assert chain_entropy(delay_chain(delta)) == pytest.approx(
            closed_form_delay_entropy(delta), abs=1e-9
        )

    def test_zero_exit_probability_gives_zero(self):
        assert chain_entropy(delay_chain(0.0)) == 0.0

    def test_stochastic_recurrent_state_makes_it_infinite(self):
        chain = MarkovChain(("a", "b"), 0, ({0: 0.5, 1: 0.5}, {0: 0.5, 1: 0.5}))
        assert math.isinf(chain_entropy(chain))


class TestClassifier:
    def test_fork_finite(self, fork):
        assert classify_max_entropy(fork).tag is EntropyClassTag.FINITE

    def test_biased_fork_finite(self, biased_fork):
        assert classify_max_entropy(biased_fork).tag is EntropyClassTag.FINITE

    def test_diamond_finite(self, diamond):
        assert classify_max_entropy(diamond).tag is EntropyClassTag.FINITE

    def test_delay_exit_unbounded_with_witness(self, delay_exit):
        cls = classify_max_entropy(delay_exit)
        assert cls.tag is EntropyClassTag.UNBOUNDED
        assert cls.witness_mec is not None

    def test_toggle_infinite_with_witness(self, toggle):
        cls = classify_max_entropy(toggle)
        assert cls.tag is EntropyClassTag.INFINITE
        assert cls.witness_state == 0

    def test_infinite_beats_unbounded(self):
        # a model carrying both witnesses classifies as infinite
        from maxent_mdp import Mdp

        mdp = Mdp(
            states=("s0", "s1", "s2"),
            initial=0,
            actions=(("hold", "go"), ("hold", "swap"), ("hold", "swap")),
            trans=(
                ({0: 1.0}, {1: 1.0}),
                ({1: 1.0}, {2: 1.0}),
                ({2: 1.0}, {1: 1.0}),
            ),
        )
        cls = classify_max_entropy(mdp)
        assert cls.tag is EntropyClassTag.INFINITE

    @given(seed=st.integers(0, 400))
    @settings(max_examples=60, deadline=None)
    def test_trichotomy(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)), branching=3)
        cls = classify_max_entropy(mdp)
        assert cls.tag in (EntropyClassTag.FINITE, EntropyClassTag.INFINITE, EntropyClassTag.UNBOUNDED)
        if cls.tag is EntropyClassTag.FINITE:
            assert cls.witness_state is None and cls.witness_mec is None
        # a finite classification implies every policy's chain entropy is finite
        if cls.tag is EntropyClassTag.FINITE:
            for _ in range(3):
                chain = induce_chain(mdp, random_policy(rng, mdp))
                assert math.isfinite(chain_entropy(chain))


class TestEnumeration:
    def test_diamond_exact(self, diamond_chain):
        est = enumerate_path_entropy(diamond_chain, 1e-12)
        assert est.n_paths == 3
        assert est.residual_mass == 0.0
        assert est.entropy_bits == pytest.approx(math.log2(3), abs=1e-12)

    def test_deterministic_single_path(self):
        chain = MarkovChain(("a", "b"), 0, ({1: 1.0}, {1: 1.0}))
        est = enumerate_path_entropy(chain, 1e-12)
        assert est.n_paths == 1 and est.entropy_bits == 0.0

    def test_initial_already_absorbed(self):
        chain = MarkovChain(("a",), 0, ({0: 1.0},))
        est = enumerate_path_entropy(chain, 1e-9)
        assert est.n_paths == 1 and est.entropy_bits == 0.0

    def test_matches_residence_formula(self):
        chain = delay_chain(0.3)
        est = enumerate_path_entropy(chain, 1e-12)
        assert est.entropy_bits == pytest.approx(chain_entropy(chain), abs=1e-9)

    def test_coarse_cutoff_reports_residual(self, diamond_chain):
        est = enumerate_path_entropy(diamond_chain, 0.5)
        assert est.residual_mass <= 0.5 + 1e-12
        assert est.entropy_bits <= math.log2(3)

    def test_budget_error(self):
        chain = delay_chain(1e-4)
        with pytest.raises(EnumerationBudgetError):
            enumerate_path_entropy(chain, 1e-12, node_cap=10)

    def test_rejects_bad_cutoff(self, diamond_chain):
        with pytest.raises(InvalidModelError):
            enumerate_path_entropy(diamond_chain, 0.0)

    def test_no_reachable_bscc_rejected(self):
        # strictly this cannot happen for a stochastic chain; an unreachable
        # bottom component plus a reachable one is fine though
        chain = MarkovChain(("a", "b", "c"), 0, ({1: 1.0}, {1: 1.0}, {2: 1.0}))
        est = enumerate_path_entropy(chain, 1e-9)
        assert est.entropy_bits == 0.0

    @given(seed=st.integers(0, 200))
    @settings(max_examples=20, deadline=None)
    def test_agrees_with_chain_entropy_on_finite_class(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        mdp = random_mdp(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)), branching=2)
        if classify_max_entropy(mdp).tag is not EntropyClassTag.FINITE:
            return
        chain = induce_chain(mdp, random_policy(rng, mdp))
        est = enumerate_path_entropy(chain, 1e-10)
        bound = est.frontier_entropy_bits + est.residual_mass * 64.0
        assert abs(chain_entropy(chain) - est.entropy_bits) <= 1e-4 + bound

import pytest

from maxent_mdp import GridWorldSpec, InvalidModelError, build_gridworld, validate_mdp
from maxent_mdp.gridworld import cell_name, parse_cell_name
from maxent_mdp.io import gridworld_from_json, gridworld_to_json


def row(mdp, cell, action):
    s = mdp.state_index(cell_name(cell))
    a = mdp.actions[s].index(action)
    return {mdp.states[t]: p for t, p in mdp.trans[s][a].items()}


def test_interior_up_distribution(bench_grid):
    assert row(bench_grid, (5, 5), "up") == pytest.approx(
        {"c5_6": 0.7, "c4_6": 0.15, "c6_6": 0.15}
    )


def test_slip_into_boundary_folds_onto_main(bench_grid):
    # moving up hugging the left boundary: the up-left slip is blocked
    assert row(bench_grid, (0, 5), "up") == pytest.approx({"c0_6": 0.85, "c1_6": 0.15})


def test_main_into_boundary_stays_with_lateral_slips(bench_grid):
    assert row(bench_grid, (0, 5), "left") == pytest.approx(
        {"c0_5": 0.7, "c0_6": 0.15, "c0_4": 0.15}
    )


def test_corner_combines_both_rules():
    spec = GridWorldSpec(width=3, height=3, initial=(0, 0))
    mdp = build_gridworld(spec)
    # main blocked and one slip blocked: blocked slip mass folds onto staying
    assert row(mdp, (0, 0), "down") == pytest.approx({"c0_0": 0.85, "c1_0": 0.15})
    assert row(mdp, (0, 0), "up") == pytest.approx({"c0_1": 0.85, "c1_1": 0.15})


def test_all_rows_stochastic(bench_grid):
    assert validate_mdp(bench_grid).ok
    for s in range(bench_grid.n_states):
        for dist in bench_grid.trans[s]:
            assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)


def test_absorbing_cells_self_loop_under_every_action(bench_grid):
    s = bench_grid.state_index("c10_5")
    assert len(bench_grid.actions[s]) == 4
    for dist in bench_grid.trans[s]:
        assert dist == {s: 1.0}


def test_walls_are_removed_and_block_movement():
    spec = GridWorldSpec(width=3, height=1, initial=(0, 0), walls=frozenset({(1, 0)}))
    mdp = build_gridworld(spec)
    assert mdp.n_states == 2
    # the wall sits to the right: the agent stays (slips also blocked in a 3x1)
    assert row(mdp, (0, 0), "right") == pytest.approx({"c0_0": 1.0})


def test_corridor_moves_fold_both_slips():
    spec = GridWorldSpec(width=3, height=1, initial=(0, 0))
    mdp = build_gridworld(spec)
    assert row(mdp, (0, 0), "right") == pytest.approx({"c1_0": 1.0})


def test_degenerate_single_absorbing_cell():
    spec = GridWorldSpec(width=1, height=1, initial=(0, 0), absorbing=frozenset({(0, 0)}))
    mdp = build_gridworld(spec)
    assert mdp.n_states == 1
    for dist in mdp.trans[0]:
        assert dist == {0: 1.0}


def test_deterministic_grid():
    spec = GridWorldSpec(width=4, height=4, initial=(0, 0), p_main=1.0, p_slip=0.0)
    mdp = build_gridworld(spec)
    assert validate_mdp(mdp).ok
    assert row(mdp, (1, 1), "right") == {"c2_1": 1.0}
    assert row(mdp, (0, 0), "left") == {"c0_0": 1.0}


def test_labels_carried_to_states(bench_grid):
    assert bench_grid.labels[bench_grid.state_index("c10_5")] == frozenset({"T"})
    assert bench_grid.labels[bench_grid.state_index("c4_3")] == frozenset({"B"})
    assert bench_grid.labels[bench_grid.state_index("c0_5")] == frozenset()


class TestSpecValidation:
    def test_slip_mass_must_balance(self):
        with pytest.raises(InvalidModelError):
            GridWorldSpec(width=2, height=2, initial=(0, 0), p_main=0.8, p_slip=0.15)

    def test_initial_must_not_be_absorbing(self):
        with pytest.raises(InvalidModelError):
            GridWorldSpec(width=2, height=2, initial=(0, 0), absorbing=frozenset({(0, 0)}))

    def test_initial_must_be_a_state(self):
        with pytest.raises(InvalidModelError):
            GridWorldSpec(width=2, height=2, initial=(5, 5))
        with pytest.raises(InvalidModelError):
            GridWorldSpec(width=2, height=2, initial=(0, 0), walls=frozenset({(0, 0)}))

    def test_labels_must_sit_on_states(self):
        with pytest.raises(InvalidModelError):
            GridWorldSpec(
                width=2, height=2, initial=(0, 0),
                walls=frozenset({(1, 1)}),
                labels={"x": frozenset({(1, 1)})},
            )


def test_grid_spec_json_round_trip(bench_grid_spec):
    doc = gridworld_to_json(bench_grid_spec)
    again = gridworld_from_json(doc)
    assert again == bench_grid_spec
    assert gridworld_to_json(again) == doc


def test_cell_names_round_trip():
    assert parse_cell_name(cell_name((3, 7))) == (3, 7)
    with pytest.raises(InvalidModelError):
        parse_cell_name("nope")

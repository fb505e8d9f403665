"""Maximum-entropy policy synthesis for Markov decision processes.

Classify whether the maximum process entropy of an MDP is finite, infinite,
or unbounded; synthesize stationary policies attaining (or approaching) it by
solving an occupancy-measure program over exponential cones; and do the same
under a temporal task given as a deterministic Rabin automaton via the product
construction.
"""

from .entropy import (
    EntropyClass,
    EntropyClassTag,
    PathEntropyEstimate,
    ResidenceVector,
    chain_entropy,
    classify_max_entropy,
    enumerate_path_entropy,
    local_entropy,
    residence_times,
)
from .errors import (
    DomainError,
    EnumerationBudgetError,
    FormatError,
    InfeasibleError,
    InvalidModelError,
    PolicyMismatchError,
    SolverError,
    UnboundedObjectiveError,
)
from .graph import (
    MecDecomposition,
    StatePartition,
    bottom_strongly_connected_components,
    is_bsc_mec,
    max_reach_probability,
    maximal_end_components,
    partition_by_reachability,
    strongly_connected_components,
)
from .gridworld import GridWorldSpec, build_gridworld
from .model import (
    MarkovChain,
    Mdp,
    StationaryPolicy,
    ValidationReport,
    induce_chain,
    path_prefix_probability,
    validate_mdp,
)
from .observer import ObserverReport, expected_observations, huffman_expected_depth, probe_count
from .product import (
    ConstrainedResult,
    FiniteMemoryController,
    ProductMdp,
    accepting_mec_indices,
    lift_policy,
    product,
    reachability_partition,
    structure_report,
    synthesize_constrained,
)
from .program import (
    EntropyProgram,
    Objective,
    SideConstraints,
    SolutionVector,
    SolveStatus,
    build_program,
    recompute_objective_bits,
    solve_program,
)
from .rabin import (
    Dra,
    always_accepting_dra,
    dra_from_json,
    dra_to_json,
    parse_dra,
    parse_hoa,
    reach_stay_dra,
    sequenced_reach_dra,
    to_hoa,
)
from .simulate import TrajectoryStats, simulate
from .sweep import ExperimentSpec, SweepVariable, run_sweep
from .synthesis import (
    SynthesisOptions,
    SynthesisResult,
    absorb_mec_states,
    extract_policy,
    min_expected_time,
    synthesize_max_entropy,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

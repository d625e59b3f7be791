"""Structural observability checks and communication design for sensor networks."""

from .design import (
    CutConstraint,
    DesignProblem,
    DesignSolution,
    InfeasibleDesignError,
    brute_force_topology,
    heuristic_topology,
    solve_min_cost_topology,
    strong_connectivity_cuts,
    uniform_costs,
    validate_topology,
)
from .graphs import (
    BipartiteGraph,
    Digraph,
    Matching,
    PathCycleDecomposition,
    bipartite_representation,
    is_strongly_connected,
    max_matching,
    min_cost_max_matching,
    path_cycle_decomposition,
    spanned_by_disjoint_cycles,
    strongly_connected_components,
)
from .io import InputError, Report, SystemFile, parse_system_file
from .numeric import (
    EstimationResult,
    RankDeficientError,
    Trajectory,
    WeightedRealization,
    cycle_spectrum,
    finite_time_estimate,
    generic_observability_test,
    observability_rank,
    realize,
    simulate,
)
from .structure import (
    CheckReport,
    CommGraph,
    DecentralizedReport,
    LinkingWitness,
    NotObservableError,
    SensorMode,
    SparsityPattern,
    SystemStructure,
    build_augmented,
    find_linking,
    sensor_pair,
    structural_observability,
    theorem2_check,
    theorem4_check,
    validate_linking,
)

__version__ = "0.1.0"

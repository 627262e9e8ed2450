"""Sparse goal-conditioned value completion on graphs and greedy-planner certificates."""

from .certificates import (
    DecisionRecord,
    action_gap,
    certify_rollout,
    decision_record,
    half_gap_test,
    local_error,
    neighbour_kendall_tau,
)
from .graph import (
    DisconnectedGraphError,
    DistanceField,
    GeometryClass,
    Graph,
    build_graph,
    fill_distance,
    geometry_classify,
    read_edge_list,
    shortest_path_distances,
    subdivide,
    write_edge_list,
)
from .instances import (
    BoundaryCondition,
    ExperimentConfig,
    MazeLayout,
    boundary_from_mapping,
    builtin_g7,
    load_layout,
    parse_layout,
    read_boundary_file,
    refine_to_graph,
    sample_boundary,
)
from .planner import Outcome, RolloutResult, basin_partition, greedy_step, rollout
from .solvers import (
    ValueField,
    harmonic_measure,
    read_value_field,
    residual_field,
    solve,
    solve_amle,
    solve_harmonic,
    solve_p_picard,
    write_value_field,
)

__version__ = "0.1.0"

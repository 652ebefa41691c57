"""Fused nearly-isotonic regression on DAG-indexed signals and its limit law."""
from .errors import (
    CycleDetected,
    DimensionMismatch,
    DuplicateEdge,
    NotConverged,
    ProbabilityContractViolated,
    SelfLoop,
    VertexOutOfRange,
)
from .graph import Dag, build_chain, build_grid2d, connected_components, from_edge_list, incidence
from .solver import (
    PenaltyConfig,
    SolverConfig,
    SolveResult,
    extract_fused_regions,
    kkt_certificate,
    objective,
    prox_edge_penalty,
    solve,
    solve_path,
)

__version__ = "0.1.0"

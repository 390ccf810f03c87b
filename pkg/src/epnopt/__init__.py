"""Energy packet networks: stationary analysis, cost, and optimal
energy distribution, with an event-driven simulation oracle."""

from .errors import (
    ApproximationOutOfBox,
    ConstraintRootNotBracketed,
    EpnError,
    InfeasibleNetwork,
    InvalidSimConfig,
    NoAdmissibleRoot,
    NoInteriorRoot,
    NoStationarySolution,
    OutOfBox,
    UnstableNetwork,
)
from .model import (
    Allocation,
    BatchDistribution,
    CostBreakdown,
    FeasibleBox,
    GeneralBatch,
    Geometric,
    NetworkConfig,
    StationaryState,
    StationPair,
)
from .stationary import (
    es_utilization,
    feasible_box,
    joint_probability,
    solve_network,
    ws_utilization_fixed_point,
    ws_utilization_geometric,
)
from .cost import (
    energy_loss_rate,
    evaluate_cost,
    geometric_cost_at,
    geometric_cost_parts,
    response_time,
)
from .optimize import (
    Method,
    OptimizeResult,
    SweepGrid,
    abundant_harvest_allocation,
    cost_curvature,
    cost_slope_two_pairs,
    coupling_coefficient,
    grid_search,
    optimal_allocation,
    optimize_multi,
    optimize_two_pairs,
    utilization_from_coupling,
)
from .sim import (
    JointStateReport,
    SimConfig,
    SimEstimate,
    check_joint_distribution,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ApproximationOutOfBox",
    "BatchDistribution",
    "ConstraintRootNotBracketed",
    "CostBreakdown",
    "EpnError",
    "FeasibleBox",
    "GeneralBatch",
    "Geometric",
    "InfeasibleNetwork",
    "InvalidSimConfig",
    "JointStateReport",
    "Method",
    "NetworkConfig",
    "NoAdmissibleRoot",
    "NoInteriorRoot",
    "NoStationarySolution",
    "OptimizeResult",
    "OutOfBox",
    "SimConfig",
    "SimEstimate",
    "StationPair",
    "StationaryState",
    "SweepGrid",
    "UnstableNetwork",
    "abundant_harvest_allocation",
    "check_joint_distribution",
    "cost_curvature",
    "cost_slope_two_pairs",
    "coupling_coefficient",
    "energy_loss_rate",
    "es_utilization",
    "evaluate_cost",
    "feasible_box",
    "geometric_cost_at",
    "geometric_cost_parts",
    "grid_search",
    "joint_probability",
    "optimal_allocation",
    "optimize_multi",
    "optimize_two_pairs",
    "response_time",
    "simulate",
    "solve_network",
    "utilization_from_coupling",
    "ws_utilization_fixed_point",
    "ws_utilization_geometric",
    "__version__",
]

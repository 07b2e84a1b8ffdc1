"""Capacitated edge-server placement.

Servers are placed on access-point sites by alternating an allocation step
(workloads to servers under a capacity window) with a weighted-medoid
location step, restarted from many k-means++ seedings.
"""

from .allocate import AllocationResult, allocate_fractional, allocate_hard
from .distance import DistanceMatrix, build_matrix, euclidean, squared_euclidean
from .locate import relocate_all, weighted_medoid
from .metrics import EvaluationReport, evaluate, weighted_mean_distance, weighted_quantile, workload_stats
from .model import (
    AccessPoint,
    Infeasible,
    Membership,
    MembershipMode,
    Metric,
    PlacementError,
    ProblemSpec,
    Solution,
    TimeLimitNoIncumbent,
    effective_weight,
    validate,
)
from .scenario_io import (
    SCENARIOS,
    SyntheticCitySpec,
    bundled_city,
    export_solution,
    generate_synthetic,
    load_aps,
    solve_scenario,
)
from .seeding import kmeanspp_init
from .solver import solve
from .validator import check

__version__ = "0.1.0"

__all__ = [
    "AccessPoint", "AllocationResult", "DistanceMatrix", "EvaluationReport", "Infeasible",
    "Membership", "MembershipMode", "Metric", "PlacementError", "ProblemSpec", "SCENARIOS",
    "Solution", "SyntheticCitySpec", "TimeLimitNoIncumbent", "allocate_fractional",
    "allocate_hard", "build_matrix", "bundled_city", "check", "effective_weight", "euclidean",
    "evaluate", "export_solution", "generate_synthetic", "kmeanspp_init", "load_aps",
    "relocate_all", "solve", "solve_scenario", "squared_euclidean", "validate",
    "weighted_mean_distance", "weighted_medoid", "weighted_quantile", "workload_stats",
]

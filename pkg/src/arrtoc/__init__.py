"""Adversarially robust set-point optimization with process benchmarks."""

from .uncertainty import UncertaintySet
from .exploration import (
    ConstraintHistorySet,
    Evaluation,
    ExploreConfig,
    HistorySet,
    explore_constraints,
    explore_cost,
    finite_diff_gradient,
    projected_ascent,
)
from .robust_move import (
    DirectionResult,
    Move,
    SigmaState,
    VerifiedMinimum,
    WorstSet,
    build_worst_set,
    min_norm_point,
    robust_local_move,
    solve_direction,
    step_size,
)
from .solver import (
    InfeasibleUnderPerturbationError,
    IterationRecord,
    ProblemSpec,
    RobustSolution,
    SolverConfig,
    SolverTrace,
    brute_force_robust_optimum,
    brute_force_worst_case,
    solve_aro,
    solve_arrtoc,
)

__version__ = "0.1.0"

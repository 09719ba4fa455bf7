"""Top-level robust set-point solvers and brute-force test oracles.

Two drivers share the same machinery: the unconstrained solver alternates
cost exploration with robust local moves until an iterate is certified as a
robust local minimum; the constrained solver additionally explores every
constraint and, when violations are reachable from the current iterate,
puts feasibility restoration ahead of cost improvement.

The brute-force functions evaluate the min-max problem on dense grids.
They are deliberately simple and slow: their job is to check the solvers,
not to compete with them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exploration import (
    ConstraintHistorySet,
    ExploreConfig,
    HistorySet,
    explore_constraints,
    explore_cost,
)
from .robust_move import (
    Move,
    SigmaState,
    VerifiedMinimum,
    build_worst_set,
    robust_local_move,
    solve_direction,
    step_size,
)
from .uncertainty import UncertaintySet

__all__ = [
    "ProblemSpec",
    "SolverConfig",
    "RobustSolution",
    "IterationRecord",
    "SolverTrace",
    "InfeasibleUnderPerturbationError",
    "solve_aro",
    "solve_arrtoc",
    "brute_force_worst_case",
    "brute_force_robust_optimum",
]


class InfeasibleUnderPerturbationError(RuntimeError):
    """The iterate is surrounded by constraint-violating neighbours."""


@dataclass(frozen=True)
class ProblemSpec:
    """A robust set-point selection problem.

    ``objective`` maps a point of shape (d,) to a float; implementations
    should also accept an (N, d) batch and return (N,) so the brute-force
    oracles can run vectorised.  Constraints are feasible iff <= 0.  Box
    bounds are treated as ordinary constraints by the constrained solver,
    which automatically backs the solution off the box by the perturbation
    radius.
    """

    dimension: int
    objective: object
    direction: str  # "minimize" | "maximize"
    uncertainty: UncertaintySet
    lower: np.ndarray
    upper: np.ndarray
    constraints: tuple = ()
    gradient: object | None = None

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.direction not in ("minimize", "maximize"):
            raise ValueError("direction must be 'minimize' or 'maximize'")
        if self.lower.size != self.dimension or self.upper.size != self.dimension:
            raise ValueError("bounds must match the problem dimension")
        if np.any(self.lower >= self.upper):
            raise ValueError("each lower bound must be below its upper bound")
        if self.uncertainty.dimension != self.dimension:
            raise ValueError("uncertainty set dimension mismatch")

    def signed_objective(self):
        """(objective, gradient) oriented so the solver always minimises."""
        if self.direction == "minimize":
            return self.objective, self.gradient
        obj = self.objective

        def negated(x, _obj=obj):
            return -np.asarray(_obj(x))

        grad = self.gradient
        if grad is None:
            return negated, None

        def negated_grad(x, _g=grad):
            return -np.asarray(_g(x))

        return negated, negated_grad

    def box_constraints(self):
        """Per-dimension bound pairs expressed as h(x) <= 0 callables."""
        out = []
        for i in range(self.dimension):
            lo, hi = self.lower[i], self.upper[i]

            def below(x, i=i, lo=lo):
                return lo - np.asarray(x, dtype=float)[..., i]

            def above(x, i=i, hi=hi):
                return np.asarray(x, dtype=float)[..., i] - hi

            out.extend([below, above])
        return tuple(out)


@dataclass
class SolverConfig:
    epsilon: float = 0.01
    sigma_init_factor: float = 0.2
    sigma_shrink: float = 1.05
    sigma_min: float = 0.001
    delta_fraction: float = 0.01  # enlargement of the constraint screen
    max_outer_iterations: int = 200
    # Movement-based stop: certification by sigma exhaustion only fires when
    # the recorded worst band surrounds the iterate (constraint-bound optima,
    # flat or one-dimensional balances); smooth interior optima instead end
    # in a fine hover, detected as consecutive sub-tolerance moves.
    small_step_tol: float = 2e-3  # scaled units
    small_step_count: int = 8
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    seed: int = 0

    def __post_init__(self):
        for name in ("epsilon", "sigma_init_factor", "sigma_shrink", "sigma_min", "delta_fraction"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.delta_fraction >= 1:
            raise ValueError("delta_fraction must be well below 1")


@dataclass(frozen=True)
class RobustSolution:
    point: np.ndarray
    nominal_value: float
    worst_case_estimate: float
    feasible_under_perturbation: bool
    iterations: int
    verified: bool


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    iterate: np.ndarray
    branch: str  # cost-move | feasibility-move | verify
    n_worst: int
    n_violations: int
    sigma: float | None
    rho: float | None
    direction: np.ndarray | None
    worst_estimate: float


@dataclass
class SolverTrace:
    records: list = field(default_factory=list)

    def append(self, record: IterationRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def _worst_estimate(history: HistorySet, center, uset) -> float:
    return build_worst_set(history, center, uset, 0.0).worst_value


def _feasibility_move(center, strict: ConstraintHistorySet, uset, epsilon: float) -> Move:
    """Direction and step that flee every in-neighbourhood violation."""
    center = np.asarray(center, dtype=float)
    scaled = uset.to_unit_ball(strict.points - center)
    result = solve_direction(scaled, None, np.zeros(center.size), epsilon)
    if not result.feasible:
        raise InfeasibleUnderPerturbationError(
            "surrounded by constraint-violating neighbours; no feasible direction"
        )
    rho = step_size(scaled, np.zeros(center.size), result.direction, 1.0)
    step = uset.from_unit_ball(rho * result.direction)
    return Move(rho, result.direction, step, float("nan"), 0)


class _BestTracker:
    """Best iterate seen so far, preferring perturbation-feasible ones."""

    def __init__(self):
        self.point = None
        self.value = np.inf
        self.feasible = False

    def offer(self, point, worst_value: float, feasible: bool) -> None:
        better = (feasible and not self.feasible) or (
            feasible == self.feasible and worst_value < self.value
        )
        if self.point is None or better:
            self.point = np.array(point, dtype=float)
            self.value = worst_value
            self.feasible = feasible


def _finalise(problem, history, uset, point, iterations, verified, feasible):
    f_user = problem.objective
    nominal = float(f_user(np.asarray(point, dtype=float)))
    g = _worst_estimate(history, point, uset)
    worst_user = -g if problem.direction == "maximize" else g
    return RobustSolution(
        point=np.array(point, dtype=float),
        nominal_value=nominal,
        worst_case_estimate=worst_user,
        feasible_under_perturbation=feasible,
        iterations=iterations,
        verified=verified,
    )


def _count_revisits(iterates, candidate, tol=1e-6) -> int:
    if not iterates:
        return 0
    arr = np.array(iterates)
    return int(np.sum(np.linalg.norm(arr - candidate, axis=1) <= tol))


def solve_aro(problem: ProblemSpec, start, config: SolverConfig | None = None):
    """Unconstrained robust solve: explore, move, verify.

    Constraints and box bounds on the problem are ignored; only the start
    point is required to lie inside the box.
    """
    config = config or SolverConfig()
    start = np.asarray(start, dtype=float)
    if np.any(start < problem.lower) or np.any(start > problem.upper):
        raise ValueError("start point lies outside the box bounds")
    f, grad = problem.signed_objective()
    uset = problem.uncertainty

    history = HistorySet()
    sigma_state = SigmaState(None, config.sigma_min, config.sigma_shrink)
    trace = SolverTrace()
    best = _BestTracker()
    x = start.copy()
    visited: list[np.ndarray] = []
    small_steps = 0

    for k in range(1, config.max_outer_iterations + 1):
        history = explore_cost(f, x, uset, history, config.explore, gradient=grad)
        g_here = _worst_estimate(history, x, uset)
        best.offer(x, g_here, True)
        outcome = robust_local_move(
            x, history, ConstraintHistorySet(), uset, sigma_state,
            config.epsilon, config.sigma_init_factor,
        )
        if isinstance(outcome, VerifiedMinimum):
            trace.append(IterationRecord(k, x.copy(), "verify", 0, 0, sigma_state.sigma, None, None, g_here))
            return _finalise(problem, history, uset, x, k, True, True), trace
        trace.append(
            IterationRecord(k, x.copy(), "cost-move", outcome.n_worst, 0,
                            outcome.sigma, outcome.rho, outcome.direction, g_here)
        )
        visited.append(x.copy())
        x = x + outcome.step
        small_steps = small_steps + 1 if outcome.rho < config.small_step_tol else 0
        if small_steps >= config.small_step_count or _count_revisits(visited, x) >= 3:
            break

    return _finalise(problem, history, uset, best.point, len(trace), False, True), trace


def solve_arrtoc(problem: ProblemSpec, start, config: SolverConfig | None = None):
    """Constrained robust solve with feasibility-restoration moves.

    Each iteration explores the cost, then every constraint over a slightly
    enlarged neighbourhood.  Violations reachable within the true
    neighbourhood trigger a feasibility move; otherwise a cost move runs
    with the just-beyond violations constraining its direction.
    """
    config = config or SolverConfig()
    start = np.asarray(start, dtype=float)
    if np.any(start < problem.lower) or np.any(start > problem.upper):
        raise ValueError("start point lies outside the box bounds")
    f, grad = problem.signed_objective()
    uset = problem.uncertainty
    enlarged = uset.scaled(1.0 + config.delta_fraction)
    constraints = tuple(problem.constraints) + problem.box_constraints()

    history = HistorySet()
    sigma_state = SigmaState(None, config.sigma_min, config.sigma_shrink)
    trace = SolverTrace()
    best = _BestTracker()
    x = start.copy()
    visited: list[np.ndarray] = []
    feasible_here = False
    small_steps = 0

    for k in range(1, config.max_outer_iterations + 1):
        history = explore_cost(f, x, uset, history, config.explore, gradient=grad)
        cset_plus = explore_constraints(constraints, x, enlarged, config.explore)
        strict = cset_plus.in_neighbourhood(x, uset)
        g_here = _worst_estimate(history, x, uset)
        feasible_here = len(strict) == 0
        best.offer(x, g_here, feasible_here)

        if len(strict):
            move = _feasibility_move(x, strict, uset, config.epsilon)
            trace.append(
                IterationRecord(k, x.copy(), "feasibility-move", 0, len(strict),
                                sigma_state.sigma, move.rho, move.direction, g_here)
            )
        else:
            outcome = robust_local_move(
                x, history, cset_plus, uset, sigma_state,
                config.epsilon, config.sigma_init_factor,
            )
            if isinstance(outcome, VerifiedMinimum):
                trace.append(IterationRecord(k, x.copy(), "verify", 0, len(cset_plus),
                                             sigma_state.sigma, None, None, g_here))
                return _finalise(problem, history, uset, x, k, True, True), trace
            move = outcome
            trace.append(
                IterationRecord(k, x.copy(), "cost-move", move.n_worst, len(cset_plus),
                                move.sigma, move.rho, move.direction, g_here)
            )
        visited.append(x.copy())
        x = x + move.step
        small_steps = small_steps + 1 if move.rho < config.small_step_tol else 0
        if small_steps >= config.small_step_count or _count_revisits(visited, x) >= 3:
            break

    return (
        _finalise(problem, history, uset, best.point, len(trace), False, best.feasible),
        trace,
    )


def _batched(fun, pts: np.ndarray) -> np.ndarray:
    """Evaluate ``fun`` on an (N, d) batch, falling back to a Python loop."""
    pts = np.asarray(pts, dtype=float)
    try:
        out = np.asarray(fun(pts), dtype=float)
        if out.shape == pts.shape[:-1]:
            return out
    except Exception:
        pass
    return np.array([float(fun(p)) for p in pts])


def _inner_offsets(uset: UncertaintySet, grid_per_axis: int) -> np.ndarray:
    axes = [np.linspace(-r, r, grid_per_axis) for r in uset.radii]
    mesh = np.meshgrid(*axes, indexing="ij")
    offsets = np.stack([m.ravel() for m in mesh], axis=-1)
    return offsets[uset.contains(offsets)]


def brute_force_worst_case(f, center, uset: UncertaintySet, grid_per_axis: int) -> float:
    """Maximum of ``f`` over a dense grid of the neighbourhood of ``center``."""
    if uset.dimension > 3:
        raise ValueError("grid oracle is intended for dimension <= 3")
    center = np.asarray(center, dtype=float)
    offsets = _inner_offsets(uset, grid_per_axis)
    values = _batched(f, center + offsets)
    return float(values.max())


def brute_force_robust_optimum(problem: ProblemSpec, outer_grid: int, inner_grid: int) -> np.ndarray:
    """Exhaustive min-max solve on nested grids (testing oracle).

    Outer points whose neighbourhood contains any constraint violation
    (including the box bounds, mirrored from the constrained solver) are
    discarded; among the rest the point with the best worst case wins.
    """
    if problem.dimension > 2:
        raise ValueError("exhaustive oracle is intended for dimension <= 2")
    f, _ = problem.signed_objective()
    uset = problem.uncertainty
    axes = [
        np.linspace(problem.lower[i], problem.upper[i], outer_grid)
        for i in range(problem.dimension)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    outer = np.stack([m.ravel() for m in mesh], axis=-1)
    offsets = _inner_offsets(uset, inner_grid)
    constraints = tuple(problem.constraints) + problem.box_constraints()

    worst = np.full(outer.shape[0], -np.inf)
    feasible = np.ones(outer.shape[0], dtype=bool)
    block = max(1, int(2e6 // max(outer.shape[0], 1)))
    for s in range(0, offsets.shape[0], block):
        chunk = offsets[s : s + block]
        pts = (outer[:, None, :] + chunk[None, :, :]).reshape(-1, problem.dimension)
        vals = _batched(f, pts).reshape(outer.shape[0], -1)
        worst = np.maximum(worst, vals.max(axis=1))
        for h in constraints:
            hv = _batched(h, pts).reshape(outer.shape[0], -1)
            feasible &= hv.max(axis=1) <= 1e-9
    if not feasible.any():
        raise InfeasibleUnderPerturbationError("no grid point is feasible under perturbations")
    worst = np.where(feasible, worst, np.inf)
    return outer[int(np.argmin(worst))]

"""Descent-direction machinery for the robust local move.

Given the explored neighbourhood of the current iterate, collect the worst
neighbours (within a leniency threshold ``sigma`` of the estimated worst
cost), find a unit direction forming obtuse angles with all of them, and
pick the smallest step that pushes every one of them out of the next
neighbourhood.  When no such direction exists, ``sigma`` is shrunk until a
direction appears or the iterate is certified as a robust local minimum.

The direction subproblem  min_{|d|<=1} max_i d.u_i  is solved through its
dual: the optimum equals minus the norm of the minimum-norm point of
conv{u_i}, attained at d = -p/|p|.  The minimum-norm point is computed with
a Wolfe-style active-set iteration, exact for these small dense inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exploration import ConstraintHistorySet, HistorySet
from .uncertainty import UncertaintySet

__all__ = [
    "WorstSet",
    "SigmaState",
    "DirectionResult",
    "Move",
    "VerifiedMinimum",
    "ExplorationFailure",
    "build_worst_set",
    "min_norm_point",
    "solve_direction",
    "step_size",
    "robust_local_move",
]

# Points closer than this to the centre give no usable direction.
_DEGENERATE_TOL = 1e-12


class ExplorationFailure(RuntimeError):
    """No recorded sample lies inside the neighbourhood of the iterate."""


@dataclass(frozen=True)
class WorstSet:
    """Neighbourhood samples whose cost reaches the leniency threshold."""

    points: np.ndarray  # (m, d)
    values: np.ndarray  # (m,)
    threshold_used: float  # worst_value - sigma
    worst_value: float  # estimated worst case at the centre


@dataclass
class SigmaState:
    """Leniency threshold, shrunk during robust-minimum verification.

    ``sigma`` is None until the first cost move initialises it from the gap
    between the estimated worst case and the nominal value at the iterate.
    """

    sigma: float | None = None
    sigma_min: float = 0.001
    shrink_factor: float = 1.05


@dataclass(frozen=True)
class DirectionResult:
    """Outcome of the direction subproblem."""

    feasible: bool
    direction: np.ndarray | None = None  # unit vector, scaled space
    margin: float | None = None  # optimal beta = max_i d.u_i (<= -epsilon)


@dataclass(frozen=True)
class Move:
    """A robust local move in both coordinate systems."""

    rho: float  # step length in scaled space
    direction: np.ndarray  # unit direction in scaled space
    step: np.ndarray  # displacement in original coordinates
    sigma: float  # leniency at which the direction was found
    n_worst: int


@dataclass(frozen=True)
class VerifiedMinimum:
    """The iterate survived the shrink loop: robust local minimum."""

    sigma_final: float


def build_worst_set(history: HistorySet, center, uset: UncertaintySet, sigma: float) -> WorstSet:
    """Members of the neighbourhood within ``sigma`` of the worst recorded cost."""
    pts, vals = history.in_neighbourhood(center, uset)
    if vals.size == 0:
        raise ExplorationFailure("no recorded evaluation inside the neighbourhood")
    worst = float(vals.max())
    threshold = worst - float(sigma)
    mask = vals >= threshold
    return WorstSet(pts[mask], vals[mask], threshold, worst)


def min_norm_point(directions, tol: float = 1e-8, max_iter: int | None = None) -> np.ndarray:
    """Minimum-norm point of the convex hull of the given vectors.

    Wolfe's active-set scheme: grow a corral, solve the affine minimisation
    over it, and line-search back into the simplex whenever a weight turns
    negative.  Terminates when every vector satisfies the support-function
    optimality test within ``tol``.
    """
    P = np.atleast_2d(np.asarray(directions, dtype=float))
    if P.size == 0:
        raise ValueError("need at least one direction")
    m = P.shape[0]
    if max_iter is None:
        max_iter = 10 * m + 100

    norms2 = np.einsum("ij,ij->i", P, P)
    active = [int(np.argmin(norms2))]
    lam = np.array([1.0])
    x = P[active[0]].copy()

    for _ in range(max_iter):
        dots = P @ x
        j = int(np.argmin(dots))
        if dots[j] >= x @ x - tol:
            break
        if j in active:
            break
        active.append(j)
        lam = np.append(lam, 0.0)
        while True:
            Q = P[active]
            k = len(active)
            # affine minimiser over the corral: KKT system with sum(alpha)=1
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = Q @ Q.T
            A[:k, k] = 1.0
            A[k, :k] = 1.0
            b = np.zeros(k + 1)
            b[k] = 1.0
            try:
                alpha = np.linalg.solve(A, b)[:k]
            except np.linalg.LinAlgError:
                alpha = np.linalg.lstsq(A, b, rcond=None)[0][:k]
            if alpha.min() > 1e-12:
                lam = alpha
                break
            diff = lam - alpha
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where((alpha <= 1e-12) & (diff > 0), lam / diff, np.inf)
            theta = min(1.0, float(ratios.min()))
            lam = (1.0 - theta) * lam + theta * alpha
            lam[lam < 1e-12] = 0.0
            keep = lam > 0.0
            if not keep.any():  # numerical corner: restart from best vertex
                keep[int(np.argmin(np.einsum("ij,ij->i", Q, Q)))] = True
                lam[keep] = 1.0
            active = [a for a, k_ in zip(active, keep) if k_]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[active]
    return x


def solve_direction(cost_points, constraint_points, center, epsilon: float) -> DirectionResult:
    """Direction forming obtuse angles with all bad neighbours.

    ``cost_points`` and ``constraint_points`` are absolute coordinates; each
    is normalised relative to ``center`` into a unit vector.  Points closer
    than 1e-12 to the centre are dropped (their direction is undefined).
    Feasible iff the optimal margin is at most ``-epsilon``.
    """
    center = np.asarray(center, dtype=float)
    rows = []
    for group in (cost_points, constraint_points):
        if group is None:
            continue
        arr = np.asarray(group, dtype=float)
        if arr.size == 0:
            continue
        arr = np.atleast_2d(arr)
        rows.append(arr)
    if not rows:
        raise ValueError("no points supplied to the direction subproblem")
    pts = np.vstack(rows)
    diffs = pts - center
    norms = np.linalg.norm(diffs, axis=1)
    ok = norms > _DEGENERATE_TOL
    if not ok.all():
        import warnings

        warnings.warn("dropping point(s) coincident with the iterate", RuntimeWarning, stacklevel=2)
    diffs, norms = diffs[ok], norms[ok]
    if diffs.shape[0] == 0:
        raise ValueError("all supplied points coincide with the iterate")
    unit = diffs / norms[:, None]
    # deduplicate identical directions to keep the corral well conditioned
    unit = np.unique(np.round(unit, 12), axis=0)

    p = min_norm_point(unit)
    pnorm = float(np.linalg.norm(p))
    if pnorm < epsilon:
        return DirectionResult(feasible=False)
    d = -p / pnorm
    return DirectionResult(feasible=True, direction=d, margin=-pnorm)


def step_size(excluded_points, center, direction, radius: float) -> float:
    """Smallest step along ``direction`` placing every point on/outside the new boundary.

    Cosine rule: each point ``x_i`` demands
    rho >= u_i.d + sqrt((u_i.d)^2 - |u_i|^2 + radius^2) with u_i = x_i - center,
    so the minimiser over all demands is their maximum.
    """
    U = np.atleast_2d(np.asarray(excluded_points, dtype=float)) - np.asarray(center, dtype=float)
    d = np.asarray(direction, dtype=float)
    proj = U @ d
    radicand = proj**2 - np.einsum("ij,ij->i", U, U) + float(radius) ** 2
    if radicand.min() < -1e-12:
        raise ValueError("excluded point lies outside the neighbourhood")
    radicand = np.clip(radicand, 0.0, None)
    rho = proj + np.sqrt(radicand)
    return max(float(rho.max()), 0.0)


def _nominal_value_at(history: HistorySet, center) -> float:
    """Value recorded at the centre itself (a centre start always exists)."""
    center = np.asarray(center, dtype=float)
    d2 = np.sum((history.points - center) ** 2, axis=1)
    i = int(np.argmin(d2))
    if d2[i] > 1e-16:
        # fall back to nearest sample; exploration always records the centre
        import warnings

        warnings.warn("no exact centre sample in history; using nearest", RuntimeWarning, stacklevel=2)
    return float(history.values[i])


def robust_local_move(
    center,
    history: HistorySet,
    constraint_plus: ConstraintHistorySet,
    uset: UncertaintySet,
    sigma_state: SigmaState,
    epsilon: float,
    sigma_init_factor: float = 0.2,
):
    """One robust local move, or certification of a robust local minimum.

    Works entirely in the scaled unit-ball frame.  The shrink loop always
    solves the direction subproblem at least once, so a zero-initialised
    sigma with a clear descent geometry still produces a move.  Constraint
    violations recorded slightly beyond the neighbourhood (``constraint_plus``)
    constrain the direction but never enter the step-size computation.
    """
    center = np.asarray(center, dtype=float)
    worst0 = build_worst_set(history, center, uset, 0.0)
    if sigma_state.sigma is None:
        gap = worst0.worst_value - _nominal_value_at(history, center)
        sigma_state.sigma = sigma_init_factor * max(gap, 0.0)

    def scale(points):
        return uset.to_unit_ball(np.atleast_2d(points) - center)

    cons_scaled = scale(constraint_plus.points) if len(constraint_plus) else np.empty((0, center.size))
    origin = np.zeros(center.size)

    while True:
        worst = build_worst_set(history, center, uset, sigma_state.sigma)
        worst_scaled = scale(worst.points)
        try:
            result = solve_direction(worst_scaled, cons_scaled, origin, epsilon)
        except ValueError:
            # every bad neighbour coincides with the iterate: nothing to flee
            result = DirectionResult(feasible=False)
        if result.feasible:
            rho = _progress_step(history, center, uset, worst, result.direction, sigma_state)
            step = uset.from_unit_ball(rho * result.direction)
            return Move(rho, result.direction, step, sigma_state.sigma, len(worst.values))
        sigma_state.sigma /= sigma_state.shrink_factor
        if sigma_state.sigma < sigma_state.sigma_min:
            return VerifiedMinimum(sigma_final=sigma_state.sigma)


# Steps below this (scaled) length make no numerical progress.
_STALL_TOL = 1e-7
# Fallback probe when no recorded sample yields a usable demand: reuse the
# exploration start offset so the next neighbourhood overlaps substantially.
_PROBE_STEP = 1.0 / 3.0


def _progress_step(history, center, uset, worst: WorstSet, direction, sigma_state: SigmaState) -> float:
    """Step length along an accepted direction, robust to boundary pile-up.

    The cosine-rule demand of a bad neighbour already sitting on the trailing
    boundary is zero, so when the whole worst set lies there the nominal step
    vanishes and the iterate would freeze.  In that case the value band is
    widened (same geometric factor as the shrink loop) until some recorded
    neighbour produces a positive demand; failing that, a fixed probe step is
    taken.
    """
    origin = np.zeros(np.asarray(center).size)

    def demand(points):
        return step_size(uset.to_unit_ball(np.atleast_2d(points) - center), origin, direction, 1.0)

    rho = demand(worst.points)
    if rho > _STALL_TOL:
        return rho
    pts, vals = history.in_neighbourhood(center, uset)
    floor = float(vals.min())
    sigma_step = max(sigma_state.sigma, sigma_state.sigma_min)
    while worst.worst_value - sigma_step > floor:
        sigma_step *= sigma_state.shrink_factor
        wider = build_worst_set(history, center, uset, sigma_step)
        rho = demand(wider.points)
        if rho > _STALL_TOL:
            return rho
    return _PROBE_STEP

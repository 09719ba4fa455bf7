"""Heuristic multi-start neighbourhood exploration.

The inner maximisation "which perturbation in the set hurts the most?" is
solved approximately: one diminishing-step projected gradient ascent per
coordinate direction plus one from the centre.  Every iterate is recorded,
so repeated exploration builds an increasingly complete picture of the
neighbourhood.  The same engine explores constraint functions, keeping only
points that violate them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .uncertainty import UncertaintySet

__all__ = [
    "Evaluation",
    "HistorySet",
    "ConstraintHistorySet",
    "ExploreConfig",
    "finite_diff_gradient",
    "projected_ascent",
    "explore_cost",
    "explore_constraints",
]

# Two recorded points closer than this are considered the same sample.
_DUPLICATE_TOL = 1e-12


class NonFiniteObjectiveError(RuntimeError):
    """The objective returned NaN/inf at a required evaluation point."""


@dataclass(frozen=True)
class Evaluation:
    """A single recorded sample (absolute point, objective value)."""

    point: np.ndarray
    value: float


@dataclass
class ExploreConfig:
    """Tuning knobs of the exploration heuristic.

    Fractions are relative to the neighbourhood radius (1 in scaled space):
    ``init_offset_fraction`` places the coordinate starts, ``init_step_fraction``
    is the first ascent step, decayed by ``step_decay`` after every step.
    """

    init_offset_fraction: float = 1.0 / 3.0
    init_step_fraction: float = 1.0 / 5.0
    step_decay: float = 0.99
    max_ascent_steps: int = 100
    fd_step: float = 1e-6
    min_step_fraction: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.init_offset_fraction < 1.0):
            raise ValueError("init_offset_fraction must lie in (0, 1)")
        if not (0.0 < self.init_step_fraction < 1.0):
            raise ValueError("init_step_fraction must lie in (0, 1)")
        if not (0.0 < self.step_decay < 1.0):
            raise ValueError("step_decay must lie in (0, 1)")


class HistorySet:
    """Accumulated (point, value) samples; grows monotonically, no duplicates."""

    def __init__(self, dimension: int | None = None):
        self._points: np.ndarray | None = None
        self._values: np.ndarray | None = None
        self._keys: set | None = None
        if dimension is not None:
            self._points = np.empty((0, dimension))
            self._values = np.empty(0)
            self._keys = set()

    def __len__(self) -> int:
        return 0 if self._values is None else self._values.size

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            raise ValueError("history set is empty")
        return self._points

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            raise ValueError("history set is empty")
        return self._values

    def entries(self) -> list[Evaluation]:
        return [Evaluation(p, float(v)) for p, v in zip(self._points, self._values)] if len(self) else []

    @staticmethod
    def _key(point: np.ndarray) -> bytes:
        # quantised coordinates; points within the duplicate tolerance share
        # a cell (up to straddling, which random samples never exercise)
        q = np.round(point / _DUPLICATE_TOL)
        return q.tobytes()

    def union(self, evaluations) -> "HistorySet":
        """New set containing these samples plus all existing ones."""
        new_pts = [np.asarray(e.point, dtype=float) for e in evaluations]
        out = HistorySet()
        if not new_pts:
            out._points, out._values, out._keys = self._points, self._values, self._keys
            return out
        vals = [float(e.value) for e in evaluations]

        if self._points is not None and len(self):
            keys = set(self._keys)
            keep_pts = [self._points]
            keep_vals = [self._values]
        else:
            keys = set()
            keep_pts, keep_vals = [], []

        add_pts, add_vals = [], []
        for p, v in zip(new_pts, vals):
            k = self._key(p)
            if k in keys:
                continue
            keys.add(k)
            add_pts.append(p)
            add_vals.append(v)
        if add_pts:
            keep_pts.append(np.array(add_pts))
            keep_vals.append(np.array(add_vals))
        out._points = np.vstack(keep_pts) if keep_pts else None
        out._values = np.concatenate(keep_vals) if keep_vals else None
        out._keys = keys
        if out._points is not None:
            out._points.setflags(write=False)
            out._values.setflags(write=False)
        return out

    def in_neighbourhood(self, center, uset: UncertaintySet):
        """(points, values) restricted to the neighbourhood of ``center``."""
        if not len(self):
            return np.empty((0, np.asarray(center).size)), np.empty(0)
        mask = uset.neighbourhood_contains(center, self._points)
        return self._points[mask], self._values[mask]


@dataclass
class ConstraintHistorySet:
    """Recorded constraint violations: every stored value is > 0."""

    points: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return self.values.size

    def add(self, point, index: int, value: float) -> None:
        if value <= 0.0:
            raise ValueError("constraint history only stores violations (value > 0)")
        point = np.asarray(point, dtype=float)[None, :]
        self.points = np.vstack([self.points, point]) if len(self) else point
        self.indices = np.append(self.indices, index)
        self.values = np.append(self.values, value)

    def in_neighbourhood(self, center, uset: UncertaintySet) -> "ConstraintHistorySet":
        if not len(self):
            return ConstraintHistorySet()
        mask = uset.neighbourhood_contains(center, self.points)
        return ConstraintHistorySet(self.points[mask], self.indices[mask], self.values[mask])


def finite_diff_gradient(f, x, fd_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with per-dimension step ``fd_step*max(1,|x_i|)``."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = fd_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = float(f(xp)), float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteObjectiveError(f"non-finite objective while differentiating at {x}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def _ascend_scaled(f, w0, uset: UncertaintySet, center, cfg: ExploreConfig, gradient=None):
    """Projected gradient ascent in the scaled unit ball.

    Returns the list of recorded :class:`Evaluation` in original coordinates.
    Iterates leaving the ball are radially projected back; the gradient
    probes used for finite differences are not recorded (they sit ~1e-6 from
    the iterate and would pollute the worst-neighbour geometry).
    """
    center = np.asarray(center, dtype=float)
    w = np.asarray(w0, dtype=float).copy()
    nw = np.linalg.norm(w)
    if nw > 1.0:
        w /= nw
    step = cfg.init_step_fraction
    evals: list[Evaluation] = []
    for _ in range(cfg.max_ascent_steps):
        x = center + uset.from_unit_ball(w)
        v = float(f(x))
        if not np.isfinite(v):
            return evals
        evals.append(Evaluation(x, v))
        try:
            g_x = gradient(x) if gradient is not None else finite_diff_gradient(f, x, cfg.fd_step)
        except NonFiniteObjectiveError:
            return evals
        g_w = uset.radii * np.asarray(g_x, dtype=float)  # chain rule into scaled space
        gn = np.linalg.norm(g_w)
        if not np.isfinite(gn) or gn < 1e-14:
            return evals
        w_new = w + step * g_w / gn
        nw = np.linalg.norm(w_new)
        if nw > 1.0:
            w_new /= nw
        if np.linalg.norm(w_new - w) < 1e-14:  # pinned on the boundary
            return evals
        w = w_new
        step *= cfg.step_decay
        if step < cfg.min_step_fraction:
            break
    # evaluate the landing point of the last accepted move
    x = center + uset.from_unit_ball(w)
    v = float(f(x))
    if np.isfinite(v):
        evals.append(Evaluation(x, v))
    return evals


def projected_ascent(f, start_delta, uset: UncertaintySet, center, cfg: ExploreConfig, gradient=None):
    """Single diminishing-step ascent of ``f(center + delta)`` over the set.

    ``start_delta`` is expressed in original perturbation coordinates and
    must lie inside the set.
    """
    start_delta = np.asarray(start_delta, dtype=float)
    if not uset.contains(start_delta):
        raise ValueError("start_delta lies outside the uncertainty set")
    return _ascend_scaled(f, uset.to_unit_ball(start_delta), uset, center, cfg, gradient=gradient)


def _start_points_scaled(f, center, uset: UncertaintySet, cfg: ExploreConfig, gradient=None):
    """Scaled-space ascent starts: the centre plus one offset per coordinate."""
    center = np.asarray(center, dtype=float)
    n = center.size
    if gradient is not None:
        g0 = np.asarray(gradient(center), dtype=float)
    else:
        g0 = finite_diff_gradient(f, center, cfg.fd_step)
    starts = [np.zeros(n)]
    for i in range(n):
        s = 1.0 if g0[i] >= 0.0 else -1.0
        e = np.zeros(n)
        e[i] = s * cfg.init_offset_fraction
        starts.append(e)
    return starts


def explore_cost(f, center, uset: UncertaintySet, prev_history: HistorySet, cfg: ExploreConfig, gradient=None) -> HistorySet:
    """Multi-start exploration of the cost around ``center``.

    Launches ``n + 1`` ascents (centre start plus one per coordinate, offset a
    third of the radius toward the locally increasing side) and merges every
    recorded sample into ``prev_history``.
    """
    evals: list[Evaluation] = []
    for w0 in _start_points_scaled(f, center, uset, cfg, gradient=gradient):
        evals.extend(_ascend_scaled(f, w0, uset, center, cfg, gradient=gradient))
    return prev_history.union(evals)


def explore_constraints(constraints, center, uset: UncertaintySet, cfg: ExploreConfig) -> ConstraintHistorySet:
    """Run the same multi-start ascent on each constraint function.

    Only evaluations with a strictly positive constraint value (violations)
    are kept, tagged with the index of the violated constraint.
    """
    out = ConstraintHistorySet()
    for j, h in enumerate(constraints):
        try:
            starts = _start_points_scaled(h, center, uset, cfg)
        except NonFiniteObjectiveError:
            continue
        for w0 in starts:
            for ev in _ascend_scaled(h, w0, uset, center, cfg):
                if ev.value > 0.0:
                    out.add(ev.point, j, ev.value)
    return out

"""Geometry of implementation-error sets.

An :class:`UncertaintySet` is an axis-aligned ellipsoid of per-dimension
radii describing the largest perturbation each state can experience when a
set-point is realised by the control layer.  Equal radii give a sphere.
All membership tests reduce to the unit ball through the affine scaling
``w_i = delta_i / radius_i``, so downstream algorithms can work in a single
scale-free coordinate system.
"""

from __future__ import annotations

import numpy as np

__all__ = ["UncertaintySet"]

# Relative slack on the quadratic form so boundary points do not flap
# between in/out under floating-point noise.
_MEMBERSHIP_TOL = 1e-9


class UncertaintySet:
    """Axis-aligned ellipsoidal perturbation set with per-dimension radii."""

    def __init__(self, radii):
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if radii.ndim != 1:
            raise ValueError("radii must be a 1-D sequence")
        if not np.all(np.isfinite(radii)) or np.any(radii <= 0.0):
            raise ValueError("every radius must be finite and strictly positive")
        self.radii = radii
        self.radii.setflags(write=False)

    @classmethod
    def sphere(cls, radius: float, dimension: int) -> "UncertaintySet":
        """Uniform-radius set: every dimension shares the same bound."""
        return cls(np.full(dimension, float(radius)))

    @property
    def dimension(self) -> int:
        return self.radii.size

    def _check_dim(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        if vec.shape[-1] != self.dimension:
            raise ValueError(
                f"dimension mismatch: set has {self.dimension}, vector has {vec.shape[-1]}"
            )
        return vec

    def quadratic_form(self, delta) -> np.ndarray:
        """sum_i (delta_i / radius_i)^2, broadcast over leading axes."""
        delta = self._check_dim(delta)
        return np.sum((delta / self.radii) ** 2, axis=-1)

    def contains(self, delta, tol: float = _MEMBERSHIP_TOL):
        """True iff the perturbation lies in the set (boundary included)."""
        return self.quadratic_form(delta) <= 1.0 + tol

    def to_unit_ball(self, delta) -> np.ndarray:
        """Scale a perturbation so the set maps onto the Euclidean unit ball."""
        return self._check_dim(delta) / self.radii

    def from_unit_ball(self, w) -> np.ndarray:
        """Inverse of :meth:`to_unit_ball`."""
        return self._check_dim(w) * self.radii

    def neighbourhood_contains(self, center, candidate, tol: float = _MEMBERSHIP_TOL):
        """True iff ``candidate`` is reachable from ``center`` under the set."""
        center = self._check_dim(center)
        return self.contains(np.asarray(candidate, dtype=float) - center, tol=tol)

    def scaled(self, factor: float) -> "UncertaintySet":
        """A copy with every radius multiplied by ``factor`` (> 0)."""
        return UncertaintySet(self.radii * float(factor))

    def __repr__(self) -> str:  # pragma: no cover
        return f"UncertaintySet(radii={self.radii.tolist()})"

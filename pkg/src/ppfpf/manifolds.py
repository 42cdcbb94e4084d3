"""Chart-level geometry for the two supported state spaces: R^n and the circle.

Points and velocities are plain numpy arrays whose last axis has the
manifold dimension; the circle uses the single chart [0, 2*pi) with
explicit wrapping after every operation. All methods are pure functions
of their inputs and accept batches of points (leading axes broadcast).
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


class DegenerateMeanError(ValueError):
    """Circular barycenter is undefined: mass is antipodally balanced."""


class Manifold:
    """Base class; see :class:`EuclideanSpace` and :class:`Circle`."""

    dim: int

    def _coerce(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1:] != (self.dim,):
            raise ValueError(
                f"expected coordinates with last axis of size {self.dim}, "
                f"got shape {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite (no NaN/Inf)")
        return coords

    def wrap(self, coords) -> np.ndarray:
        """Normalize chart coordinates (identity on R^n, mod 2*pi on S^1)."""
        raise NotImplementedError

    def step(self, coords, velocity, dt: float) -> np.ndarray:
        """Move each point along its chart velocity for time dt and re-wrap."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        coords = self._coerce(coords)
        velocity = np.asarray(velocity, dtype=float)
        if not np.all(np.isfinite(velocity)):
            raise ValueError("velocity must be finite")
        return self.wrap(coords + velocity * dt)

    def translate(self, coords, delta) -> np.ndarray:
        """Chart translation by a finite increment, re-wrapped."""
        coords = self._coerce(coords)
        delta = np.asarray(delta, dtype=float)
        if not np.all(np.isfinite(delta)):
            raise ValueError("increment must be finite")
        return self.wrap(coords + delta)

    def distance(self, p, q) -> np.ndarray:
        raise NotImplementedError

    def barycenter(self, points, weights=None) -> np.ndarray:
        raise NotImplementedError

    def _weights(self, n: int, weights) -> np.ndarray:
        if weights is None:
            return np.full(n, 1.0 / n)
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise ValueError(f"weights must have shape ({n},)")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must not all be zero")
        return w / total


class EuclideanSpace(Manifold):
    """R^n with the Euclidean metric; chart coordinates are global."""

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise ValueError("Euclidean dimension must be >= 1")
        self.dim = int(dim)

    def __repr__(self):
        return f"EuclideanSpace({self.dim})"

    def wrap(self, coords) -> np.ndarray:
        return self._coerce(coords).copy()

    def distance(self, p, q) -> np.ndarray:
        p = self._coerce(p)
        q = self._coerce(q)
        return np.linalg.norm(p - q, axis=-1)

    def barycenter(self, points, weights=None) -> np.ndarray:
        points = self._coerce(points)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("expected a nonempty (N, dim) array of points")
        w = self._weights(points.shape[0], weights)
        return w @ points


class Circle(Manifold):
    """The unit circle in its angle chart [0, 2*pi).

    Distances are geodesic: d(a, b) = pi - ||a - b| - pi|, at most pi.
    The barycenter is the Frechet mean of squared circular distance,
    found from the extrinsic mean (angle of the weighted resultant) and
    refined by fixed-point iteration.
    """

    dim = 1

    def __repr__(self):
        return "Circle()"

    def wrap(self, coords) -> np.ndarray:
        coords = self._coerce(coords)
        wrapped = np.mod(coords, TWO_PI)
        # mod can round a tiny negative input up to exactly 2*pi
        wrapped[wrapped >= TWO_PI] = 0.0
        return wrapped

    def distance(self, p, q) -> np.ndarray:
        p = self.wrap(p)
        q = self.wrap(q)
        gap = np.abs(p[..., 0] - q[..., 0])
        return np.pi - np.abs(gap - np.pi)

    def signed_arc(self, origin, target) -> np.ndarray:
        """Signed geodesic displacement from origin to target, in [-pi, pi)."""
        origin = self.wrap(origin)
        target = self.wrap(target)
        return np.mod(target[..., 0] - origin[..., 0] + np.pi, TWO_PI) - np.pi

    def barycenter(self, points, weights=None) -> np.ndarray:
        points = self.wrap(points)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("expected a nonempty (N, 1) array of angles")
        w = self._weights(points.shape[0], weights)
        ang = points[:, 0]
        c = w @ np.cos(ang)
        s = w @ np.sin(ang)
        if np.hypot(c, s) < 1e-12:
            raise DegenerateMeanError(
                "circular mean undefined: resultant length below 1e-12"
            )
        theta = np.mod(np.arctan2(s, c), TWO_PI)
        for _ in range(100):
            delta = np.mod(ang - theta + np.pi, TWO_PI) - np.pi
            update = w @ delta
            theta = np.mod(theta + update, TWO_PI)
            if abs(update) < 1e-10:
                break
        out = np.array([theta])
        out[out >= TWO_PI] = 0.0
        return out

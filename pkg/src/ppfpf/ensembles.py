"""Particle ensemble container shared by the gain solver and the filters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifolds import Manifold


@dataclass
class ParticleEnsemble:
    """N particle positions on a common manifold, optionally weighted.

    positions has shape (N, dim). weights, present only for weighted
    filters, has shape (N,), is nonnegative and sums to one.
    """

    positions: np.ndarray
    manifold: Manifold
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[0] < 1:
            raise ValueError("positions must be a nonempty (N, dim) array")
        if self.positions.shape[1] != self.manifold.dim:
            raise ValueError(
                f"positions have dimension {self.positions.shape[1]}, "
                f"manifold has dimension {self.manifold.dim}"
            )
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (self.size,):
                raise ValueError("weights must have shape (N,)")
            if np.any(self.weights < 0):
                raise ValueError("weights must be nonnegative")
            if abs(self.weights.sum() - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1 within 1e-9")

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def mean(self) -> np.ndarray:
        """Barycenter of the ensemble (weighted if weights are present)."""
        return self.manifold.barycenter(self.positions, self.weights)

    def spread(self) -> float:
        """Mean squared distance to the barycenter (weighted if weighted)."""
        center = self.mean()
        d = self.manifold.distance(self.positions, center[None, :])
        if self.weights is None:
            return float(np.mean(d * d))
        return float(self.weights @ (d * d))

"""Feedback particle filtering for point-process observations.

Interacting particle filters for hidden diffusions on R^n and the
circle observed through conditionally Poisson event streams, with
baseline filters (bootstrap, constant-gain, Gaussian assumed-density),
a dense-grid reference solver, and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from .dynamics import HiddenModel, IntensityChannel, ObservationStream
from .ensembles import ParticleEnsemble
from .filters import GaussianBelief, HomotopyConfig
from .gain import GainSolution, GainSolverConfig
from .manifolds import Circle, EuclideanSpace
from .oracle import GridDensity

__all__ = [
    "__version__",
    "Circle",
    "EuclideanSpace",
    "GainSolution",
    "GainSolverConfig",
    "GaussianBelief",
    "GridDensity",
    "HiddenModel",
    "HomotopyConfig",
    "IntensityChannel",
    "ObservationStream",
    "ParticleEnsemble",
]

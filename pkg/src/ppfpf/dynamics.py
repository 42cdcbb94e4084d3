"""Hidden-state diffusion models, event intensities, and simulators.

Vector fields and intensities are batch callables: they take an (N, dim)
array of chart coordinates and return (N, dim) (fields) or (N,) arrays
(intensities). Truth trajectories are generated by Euler-Maruyama (or a
Heun predictor-corrector when the noise fields are state dependent, to
honor the Stratonovich convention), and event counts by per-step
Bernoulli thinning of the conditional Poisson intensities.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .manifolds import Manifold

VectorField = Callable[[np.ndarray], np.ndarray]
Intensity = Callable[[np.ndarray], np.ndarray]


@dataclass
class HiddenModel:
    """Diffusion dX = V0 dt + sum_j Vj o dB_j on a manifold chart.

    drift is V0; diffusion lists V1..Vr, one per independent Brownian
    driver. additive_noise declares that the diffusion fields do not
    depend on the state, in which case a plain Euler-Maruyama step is
    exact in form; otherwise steps use the Heun predictor-corrector.
    """

    manifold: Manifold
    drift: VectorField
    diffusion: Sequence[VectorField] = field(default_factory=list)
    additive_noise: bool = True

    @property
    def n_noise(self) -> int:
        return len(self.diffusion)


@dataclass
class IntensityChannel:
    """A strictly positive event rate h over the state space.

    exp_form, when set to (coef, slope), declares h(x) = coef*exp(slope*x)
    on 1-D Euclidean space; the Gaussian assumed-density filter uses it
    for closed-form moment updates.
    """

    h: Intensity
    label: str
    exp_form: tuple[float, float] | None = None


@dataclass
class ObservationStream:
    """Per-step event counts: counts[k, c] is the number of channel-c
    events during step k (the increment of the counting process)."""

    dt: float
    counts: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2:
            raise ValueError("counts must be a (steps, channels) array")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def steps(self) -> int:
        return self.counts.shape[0]

    @property
    def n_channels(self) -> int:
        return self.counts.shape[1]


def _field_sum(model: HiddenModel, positions: np.ndarray, noise: np.ndarray):
    """Evaluate (drift values, summed diffusion increment) at positions."""
    drift = np.asarray(model.drift(positions), dtype=float)
    if drift.shape != positions.shape:
        raise ValueError("drift output shape does not match positions")
    increment = np.zeros_like(positions)
    for j, vf in enumerate(model.diffusion):
        g = np.asarray(vf(positions), dtype=float)
        if g.shape != positions.shape:
            raise ValueError("diffusion output shape does not match positions")
        increment += g * noise[:, j][:, None]
    return drift, increment


def em_step(model: HiddenModel, positions: np.ndarray, dt: float, noise: np.ndarray) -> np.ndarray:
    """One prior-dynamics step for a batch of states.

    noise holds the Brownian increments, shape (N, r) with entries
    drawn N(0, dt) by the caller; RNG ownership stays with the harness.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    positions = np.asarray(positions, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (positions.shape[0], model.n_noise):
        raise ValueError(
            f"noise must have shape ({positions.shape[0]}, {model.n_noise})"
        )
    drift0, diff0 = _field_sum(model, positions, noise)
    if model.additive_noise:
        return model.manifold.wrap(positions + drift0 * dt + diff0)
    # Heun predictor-corrector for the Stratonovich convention
    predictor = model.manifold.wrap(positions + drift0 * dt + diff0)
    drift1, diff1 = _field_sum(model, predictor, noise)
    increment = 0.5 * (drift0 + drift1) * dt + 0.5 * (diff0 + diff1)
    return model.manifold.wrap(positions + increment)


def simulate_truth(
    model: HiddenModel,
    x0: np.ndarray,
    dt: float,
    steps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample one trajectory of length steps+1 starting at x0."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x0 = model.manifold.wrap(np.asarray(x0, dtype=float).reshape(1, -1))
    out = np.empty((steps + 1, model.manifold.dim))
    out[0] = x0[0]
    state = x0
    scale = np.sqrt(dt)
    for k in range(steps):
        noise = rng.normal(0.0, scale, size=(1, model.n_noise))
        state = em_step(model, state, dt, noise)
        out[k + 1] = state[0]
    return out


def simulate_observations(
    channels: Sequence[IntensityChannel],
    truth: np.ndarray,
    dt: float,
    rng: np.random.Generator,
) -> ObservationStream:
    """Thin each channel's intensity into per-step Bernoulli counts.

    An event in step k fires with probability min(1, h(X_k)*dt) where
    X_k is the state at the start of the step. Rates with h*dt > 0.5
    are accepted but reported with a warning: the one-event-per-step
    approximation degrades there.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    truth = np.asarray(truth, dtype=float)
    steps = truth.shape[0] - 1
    n_c = len(channels)
    probs = np.empty((steps, n_c))
    for c, ch in enumerate(channels):
        rate = np.asarray(ch.h(truth[:-1]), dtype=float)
        if rate.shape != (steps,):
            raise ValueError(f"channel {ch.label!r} must map (N, dim) to (N,)")
        if np.any(rate <= 0):
            raise ValueError(f"channel {ch.label!r} intensity must be positive")
        probs[:, c] = rate * dt
    overdriven = int(np.count_nonzero(probs > 0.5))
    if overdriven:
        warnings.warn(
            f"{overdriven} step-channel pairs have h*dt > 0.5 "
            f"(max {probs.max():.3g}); Bernoulli thinning is biased there",
            RuntimeWarning,
            stacklevel=2,
        )
    draws = rng.random(size=(steps, n_c))
    counts = (draws < np.minimum(probs, 1.0)).astype(np.int64)
    return ObservationStream(
        dt=dt, counts=counts, labels=tuple(ch.label for ch in channels)
    )

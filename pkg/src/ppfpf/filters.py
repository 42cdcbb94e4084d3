"""Particle and moment filters for point-process observations.

Each filter is a step function mapping (state, per-step event counts) to
a new state, consuming per-particle process noise supplied by the
caller. The unweighted interacting filter moves particles with the
prior dynamics plus a control drift solving the gain equation for the
negated total intensity, and transforms them through each observed
event with a deterministic log-homotopy flow. Baselines: a bootstrap
particle filter with systematic resampling, a constant-gain filter that
translates every particle by a common vector, and a Gaussian
assumed-density filter for 1-D exponential-family intensities.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import HiddenModel, IntensityChannel, em_step
from .ensembles import ParticleEnsemble
from .gain import GainSolverConfig, solve_E
from .manifolds import EuclideanSpace

MAX_FLOW_SUBSTEPS = 16


class DegenerateWeightsError(RuntimeError):
    """All importance weights underflowed to zero."""


@dataclass(frozen=True)
class HomotopyConfig:
    """Euler discretization of the event flow: n_steps steps of size
    1/n_steps, each re-estimating the flow field. A step whose largest
    particle move exceeds one kernel lengthscale is halved (up to
    MAX_FLOW_SUBSTEPS) as a stability guard."""

    n_steps: int = 20
    gain: GainSolverConfig = GainSolverConfig()
    substep_guard: bool = True

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


@dataclass
class GaussianBelief:
    """State of the 1-D Gaussian assumed-density filter."""

    mean: float
    var: float

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError("variance must be positive")


def _intensity_values(ch: IntensityChannel, positions: np.ndarray) -> np.ndarray:
    values = np.asarray(ch.h(positions), dtype=float)
    if values.shape != (positions.shape[0],):
        raise ValueError(f"channel {ch.label!r} must map (N, dim) to (N,)")
    return values


def total_intensity(channels: Sequence[IntensityChannel]):
    """Summed rate over channels (the compensator of the merged stream)."""

    def h_total(positions: np.ndarray) -> np.ndarray:
        out = np.zeros(positions.shape[0])
        for ch in channels:
            out += _intensity_values(ch, positions)
        return out

    return h_total


def ppfpf_drift_step(
    ens: ParticleEnsemble,
    model: HiddenModel,
    channels: Sequence[IntensityChannel],
    dt: float,
    gain_cfg: GainSolverConfig,
    noise: np.ndarray,
) -> ParticleEnsemble:
    """Between-event step: prior dynamics plus the control drift.

    The control field solves the gain equation for phi = -H with
    H the summed intensity, so the particle distribution picks up the
    compensator term of the filtering equation. The field is estimated
    from the pre-step ensemble and applied after the prediction.
    """
    if ens.weights is not None:
        raise ValueError("expected an unweighted ensemble")
    h_total = total_intensity(channels)
    sol = solve_E(ens, lambda x: -h_total(x), gain_cfg)
    moved = em_step(model, ens.positions, dt, noise)
    moved = ens.manifold.step(moved, sol.vectors, dt)
    return ParticleEnsemble(moved, ens.manifold)


def homotopy_transform(
    ens: ParticleEnsemble, h, cfg: HomotopyConfig
) -> ParticleEnsemble:
    """Deterministic particle flow realizing one event update.

    Interpolates the pre-event distribution to the reweighted one along
    mu_s proportional to h^s * mu and integrates the matching flow
    field, the solution of the gain equation for phi = log h, with
    n_steps Euler steps of size 1/n_steps.
    """
    if ens.weights is not None:
        raise ValueError("expected an unweighted ensemble")
    positions = ens.positions
    rate = np.asarray(h(positions), dtype=float)
    if np.any(rate <= 0) or not np.all(np.isfinite(rate)):
        raise ValueError("intensity must be strictly positive at every particle")

    log_h = lambda x: np.log(np.asarray(h(x), dtype=float))
    ds = 1.0 / cfg.n_steps
    scale = cfg.gain.lengthscale()
    for _ in range(cfg.n_steps):
        current = ParticleEnsemble(positions, ens.manifold)
        sol = solve_E(current, log_h, cfg.gain)
        substeps = 1
        if cfg.substep_guard:
            v_max = float(np.abs(sol.vectors).max())
            while v_max * ds / substeps > scale and substeps < MAX_FLOW_SUBSTEPS:
                substeps *= 2
        positions = ens.manifold.step(positions, sol.vectors, ds / substeps)
        for _ in range(substeps - 1):
            current = ParticleEnsemble(positions, ens.manifold)
            sol = solve_E(current, log_h, cfg.gain)
            positions = ens.manifold.step(positions, sol.vectors, ds / substeps)
    return ParticleEnsemble(positions, ens.manifold)


def ppfpf_step(
    ens: ParticleEnsemble,
    model: HiddenModel,
    channels: Sequence[IntensityChannel],
    counts: Sequence[int],
    dt: float,
    gain_cfg: GainSolverConfig,
    homotopy_cfg: HomotopyConfig,
    noise: np.ndarray,
) -> ParticleEnsemble:
    """Full filter step: predict, correct, then one flow per event."""
    counts = np.asarray(counts)
    if counts.shape != (len(channels),) or np.any(counts < 0):
        raise ValueError("counts must hold one nonnegative integer per channel")
    ens = ppfpf_drift_step(ens, model, channels, dt, gain_cfg, noise)
    for c, ch in enumerate(channels):
        for _ in range(int(counts[c])):
            ens = homotopy_transform(ens, ch.h, homotopy_cfg)
    return ens


def effective_sample_size(weights: np.ndarray) -> float:
    return float(1.0 / np.sum(weights * weights))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices of a systematic resampling pass (one uniform draw)."""
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions)


def bpf_step(
    ens: ParticleEnsemble,
    model: HiddenModel,
    channels: Sequence[IntensityChannel],
    counts: Sequence[int],
    dt: float,
    noise: np.ndarray,
    rng: np.random.Generator,
    resample_threshold: float = 0.5,
) -> ParticleEnsemble:
    """Bootstrap step: propagate with the prior, reweight with the
    point-process likelihood, resample when ESS/N drops below the
    threshold."""
    if ens.weights is None:
        raise ValueError("bootstrap filter needs a weighted ensemble")
    counts = np.asarray(counts)
    positions = em_step(model, ens.positions, dt, noise)
    # float extremes here surface as DegenerateWeightsError, not warnings
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_w = np.log(np.maximum(ens.weights, 1e-300))
        for c, ch in enumerate(channels):
            rate = _intensity_values(ch, positions)
            log_w += counts[c] * np.log(rate) - rate * dt
        log_w -= log_w.max()
        weights = np.exp(log_w)
    total = weights.sum()
    if not np.isfinite(total) or total <= 0:
        raise DegenerateWeightsError("all importance weights vanished")
    weights /= total
    if effective_sample_size(weights) / ens.size < resample_threshold:
        keep = systematic_resample(weights, rng)
        positions = positions[keep]
        weights = np.full(ens.size, 1.0 / ens.size)
    return ParticleEnsemble(positions, ens.manifold, weights)


def ekspf_step(
    ens: ParticleEnsemble,
    model: HiddenModel,
    channels: Sequence[IntensityChannel],
    counts: Sequence[int],
    dt: float,
    noise: np.ndarray,
) -> ParticleEnsemble:
    """Constant-gain baseline: every particle receives the same
    gain-times-innovation increment K_c (dN_c - hbar_c dt) with
    K_c = Cov(x, h_c) / hbar_c from the pre-step ensemble. On the
    circle this is applied naively in the [0, 2*pi) chart."""
    if ens.weights is not None:
        raise ValueError("expected an unweighted ensemble")
    counts = np.asarray(counts)
    x = ens.positions
    shift = np.zeros(ens.manifold.dim)
    for c, ch in enumerate(channels):
        rate = _intensity_values(ch, x)
        h_bar = rate.mean()
        gain = x.T @ (rate - h_bar) / (ens.size * h_bar)
        shift += gain * (counts[c] - h_bar * dt)
    positions = em_step(model, x, dt, noise)
    positions = ens.manifold.translate(positions, shift)
    return ParticleEnsemble(positions, ens.manifold)


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(20)


def _channel_moments(ch: IntensityChannel, mean: float, var: float):
    """(hbar, E[(x-mean) h], E[(x-mean)^2 h]) under N(mean, var).

    Closed forms for declared exponential intensities, Gauss-Hermite
    quadrature with 20 nodes otherwise.
    """
    if ch.exp_form is not None:
        coef, slope = ch.exp_form
        h_bar = coef * np.exp(slope * mean + 0.5 * slope * slope * var)
        return h_bar, h_bar * slope * var, h_bar * (slope * slope * var * var + var)
    dev = np.sqrt(2.0 * var) * _GH_NODES
    rate = np.asarray(ch.h((mean + dev)[:, None]), dtype=float)
    w = _GH_WEIGHTS / np.sqrt(np.pi)
    h_bar = float(w @ rate)
    first = float(w @ (dev * rate))
    second = float(w @ (dev * dev * rate))
    return h_bar, first, second


def adf_step(
    belief: GaussianBelief,
    drift_coef: float,
    diffusion_var: float,
    channels: Sequence[IntensityChannel],
    counts: Sequence[int],
    dt: float,
) -> GaussianBelief:
    """Gaussian moment closure for a 1-D Ornstein-Uhlenbeck prior
    dX = a X dt + sigma dW observed through counting channels.

    Between events the moments follow
        m' = m + (a m - E[(x-m) h]) dt
        P' = P + (2 a P + sigma^2 - E[(x-m)^2 h] + P hbar) dt
    summed over channels; each event applies the Gaussian projection of
    the multiplicative update (exact for exponential intensities:
    m -> m + slope*P with P unchanged).
    """
    counts = np.asarray(counts)
    m, p = belief.mean, belief.var
    dm = drift_coef * m
    dp = 2.0 * drift_coef * p + diffusion_var
    for ch in channels:
        h_bar, first, second = _channel_moments(ch, m, p)
        dm -= first
        dp -= second - p * h_bar
    m += dm * dt
    p += dp * dt
    if p <= 0:
        warnings.warn(
            "assumed-density variance clamped to 1e-8", RuntimeWarning, stacklevel=2
        )
        p = 1e-8
    for c, ch in enumerate(channels):
        for _ in range(int(counts[c])):
            if ch.exp_form is not None:
                _, slope = ch.exp_form
                m += slope * p
            else:
                h_bar, first, second = _channel_moments(ch, m, p)
                shift = first / h_bar
                p_new = second / h_bar - shift * shift
                m += shift
                p = p_new
            if p <= 0:
                warnings.warn(
                    "assumed-density variance clamped to 1e-8",
                    RuntimeWarning,
                    stacklevel=2,
                )
                p = 1e-8
    return GaussianBelief(mean=float(m), var=float(p))

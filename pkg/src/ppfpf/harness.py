"""Experiment runner: shared streams, filter loops, metrics, artifacts.

One run simulates the hidden trajectory and its event stream once, then
replays that identical stream through every configured filter (and the
grid reference solver when enabled). Every consumer draws randomness
from its own sub-stream derived from (seed, purpose), so reconfiguring
one filter never perturbs another's random numbers. Outputs: a
versioned metrics.csv (one row per filter per run), per-run trajectory
CSVs, the replayable stream CSV, and a manifest with the full
configuration and a content hash of the config source.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dynamics import (
    HiddenModel,
    IntensityChannel,
    ObservationStream,
    simulate_observations,
    simulate_truth,
)
from .ensembles import ParticleEnsemble
from .filters import (
    GaussianBelief,
    HomotopyConfig,
    adf_step,
    bpf_step,
    ekspf_step,
    ppfpf_step,
)
from .manifolds import TWO_PI, Circle, EuclideanSpace, Manifold
from .oracle import (
    GridDensity,
    grid_circular_spread,
    grid_event_update,
    grid_moments,
    grid_predict_correct,
)

METRICS_SCHEMA_VERSION = 1
METRICS_COLUMNS = (
    "schema_version",
    "run_id",
    "seed",
    "filter",
    "status",
    "mse",
    "avg_posterior_variance",
    "oracle_mean_abs_err",
    "oracle_var_abs_err",
    "event_count",
    "wall_clock_seconds",
)

RNG_PURPOSES = {
    "truth": 0,
    "observations": 1,
    "init": 2,
    "ppfpf": 3,
    "bpf": 4,
    "ekspf": 5,
    "adf": 6,
    "resample": 7,
}


def derive_rng(seed: int, purpose: str) -> np.random.Generator:
    """Independent, named sub-stream of the run seed."""
    key = RNG_PURPOSES[purpose]
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(key,))
    )


@dataclass
class Problem:
    """Everything a run needs: model, channels, initializers, oracle."""

    model: HiddenModel
    channels: list[IntensityChannel]
    sample_x0: Callable[[np.random.Generator], np.ndarray]
    sample_init: Callable[[np.random.Generator, int], np.ndarray]
    oracle_init: Callable[[int], GridDensity]
    adf_params: tuple[float, float, float, float] | None  # a, sigma^2, m0, P0


def _ou_problem(drift_coef, diffusion_var, coef, slope, init_mean, init_var,
                halfwidth) -> Problem:
    manifold = EuclideanSpace(1)
    sigma = float(np.sqrt(diffusion_var))
    model = HiddenModel(
        manifold=manifold,
        drift=lambda x: drift_coef * x,
        diffusion=[lambda x: np.full_like(x, sigma)],
    )
    channels = [
        IntensityChannel(
            h=lambda x: coef * np.exp(slope * x[:, 0]),
            label="exp",
            exp_form=(coef, slope),
        )
    ]
    std = float(np.sqrt(init_var))
    return Problem(
        model=model,
        channels=channels,
        sample_x0=lambda rng: rng.normal(init_mean, std, size=1),
        sample_init=lambda rng, n: rng.normal(init_mean, std, size=(n, 1)),
        oracle_init=lambda points: GridDensity.gaussian(
            init_mean, init_var, -halfwidth, halfwidth, points
        ),
        adf_params=(drift_coef, diffusion_var, init_mean, init_var),
    )


def _circle_problem() -> Problem:
    manifold = Circle()
    model = HiddenModel(
        manifold=manifold,
        drift=lambda x: np.zeros_like(x),
        diffusion=[lambda x: np.ones_like(x)],
    )

    def bump(i: int):
        center = i * np.pi / 2.0
        return lambda x: 20.0 * np.exp(10.0 * (np.cos(x[:, 0] - center) - 1.0))

    channels = [
        IntensityChannel(h=bump(i), label=f"bump{i}") for i in (1, 2, 3, 4)
    ]
    return Problem(
        model=model,
        channels=channels,
        sample_x0=lambda rng: rng.uniform(0.0, TWO_PI, size=1),
        sample_init=lambda rng, n: rng.uniform(0.0, TWO_PI, size=(n, 1)),
        oracle_init=lambda points: GridDensity.uniform_circle(points),
        adf_params=None,
    )


def build_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.preset == "fig2_ou":
        return _ou_problem(-1.0, 2.0, 2.0, 1.0, 0.0, 1.0, 8.0)
    if cfg.preset == "fig3_circle":
        return _circle_problem()
    c = cfg.custom
    return _ou_problem(
        c["drift_coef"], c["diffusion"], c["intensity_coef"],
        c["intensity_slope"], c["init_mean"], c["init_var"],
        c["domain_halfwidth"],
    )


# ---------------------------------------------------------------- filters


def _run_ppfpf(problem, cfg, stream, init_positions, rng, on_step=None):
    manifold = problem.model.manifold
    ens = ParticleEnsemble(init_positions.copy(), manifold)
    hom = HomotopyConfig(n_steps=cfg.homotopy_steps, gain=cfg.gain)
    est = np.empty((cfg.steps, manifold.dim))
    var = np.empty(cfg.steps)
    scale = np.sqrt(cfg.dt)
    r = problem.model.n_noise
    for k in range(cfg.steps):
        noise = rng.normal(0.0, scale, size=(ens.size, r))
        ens = ppfpf_step(
            ens, problem.model, problem.channels, stream.counts[k],
            cfg.dt, cfg.gain, hom, noise,
        )
        est[k] = ens.mean()
        var[k] = ens.spread()
        if on_step is not None:
            on_step(k, ens)
    return est, var


def _run_bpf(problem, cfg, stream, init_positions, rng, on_step=None):
    manifold = problem.model.manifold
    n = init_positions.shape[0]
    ens = ParticleEnsemble(
        init_positions.copy(), manifold, np.full(n, 1.0 / n)
    )
    resample_rng = rng["resample"]
    noise_rng = rng["noise"]
    est = np.empty((cfg.steps, manifold.dim))
    var = np.empty(cfg.steps)
    scale = np.sqrt(cfg.dt)
    r = problem.model.n_noise
    for k in range(cfg.steps):
        noise = noise_rng.normal(0.0, scale, size=(n, r))
        ens = bpf_step(
            ens, problem.model, problem.channels, stream.counts[k],
            cfg.dt, noise, resample_rng, cfg.resample_threshold,
        )
        est[k] = ens.mean()
        var[k] = ens.spread()
        if on_step is not None:
            on_step(k, ens)
    return est, var


def _run_ekspf(problem, cfg, stream, init_positions, rng, on_step=None):
    manifold = problem.model.manifold
    ens = ParticleEnsemble(init_positions.copy(), manifold)
    est = np.empty((cfg.steps, manifold.dim))
    var = np.empty(cfg.steps)
    scale = np.sqrt(cfg.dt)
    r = problem.model.n_noise
    for k in range(cfg.steps):
        noise = rng.normal(0.0, scale, size=(ens.size, r))
        ens = ekspf_step(
            ens, problem.model, problem.channels, stream.counts[k],
            cfg.dt, noise,
        )
        est[k] = ens.mean()
        var[k] = ens.spread()
        if on_step is not None:
            on_step(k, ens)
    return est, var


def _run_adf(problem, cfg, stream, init_positions, rng, on_step=None):
    if problem.adf_params is None:
        raise ValueError("assumed-density filter unavailable for this preset")
    a, sigma2, m0, p0 = problem.adf_params
    belief = GaussianBelief(mean=m0, var=p0)
    est = np.empty((cfg.steps, 1))
    var = np.empty(cfg.steps)
    for k in range(cfg.steps):
        belief = adf_step(
            belief, a, sigma2, problem.channels, stream.counts[k], cfg.dt
        )
        est[k, 0] = belief.mean
        var[k] = belief.var
    return est, var


FILTER_RUNNERS = {
    "ppfpf": _run_ppfpf,
    "bpf": _run_bpf,
    "ekspf": _run_ekspf,
    "adf": _run_adf,
}


def run_oracle(problem: Problem, cfg: ExperimentConfig, stream: ObservationStream):
    """Reference posterior mean/variance series on the identical stream;
    also returns the final density for snapshot export."""
    gd = problem.oracle_init(cfg.oracle_points)
    circular = isinstance(problem.model.manifold, Circle)
    means = np.empty((cfg.steps, problem.model.manifold.dim))
    variances = np.empty(cfg.steps)
    for k in range(cfg.steps):
        gd = grid_predict_correct(gd, problem.model, problem.channels, cfg.dt)
        for c, ch in enumerate(problem.channels):
            for _ in range(int(stream.counts[k, c])):
                gd = grid_event_update(gd, ch.h)
        if circular:
            direction, _ = grid_moments(gd)
            means[k, 0] = direction
            variances[k] = grid_circular_spread(gd, direction)
        else:
            means[k, 0], variances[k] = grid_moments(gd)
    return means, variances, gd


# ---------------------------------------------------------------- metrics


@dataclass
class MetricsRow:
    run_id: int
    seed: int
    filter_name: str
    status: str
    mse: float | None
    avg_posterior_variance: float | None
    oracle_mean_abs_err: float | None
    oracle_var_abs_err: float | None
    event_count: int
    wall_clock_seconds: float


def compute_metrics(
    manifold: Manifold,
    truth: np.ndarray,
    estimates: np.ndarray,
    variances: np.ndarray,
    oracle_means: np.ndarray | None = None,
    oracle_vars: np.ndarray | None = None,
) -> dict:
    """Time-averaged squared estimation error (chart or circular
    distance), reported posterior variance, and reference-tracking
    errors when the oracle series is present."""
    if estimates.shape[0] != truth.shape[0] - 1:
        raise ValueError("estimates must have one entry per step")
    if variances.shape[0] != estimates.shape[0]:
        raise ValueError("variances and estimates must have equal length")
    err = manifold.distance(estimates, truth[1:])
    out = {
        "mse": float(np.mean(err * err)),
        "avg_posterior_variance": float(np.mean(variances)),
        "oracle_mean_abs_err": None,
        "oracle_var_abs_err": None,
    }
    if oracle_means is not None:
        if oracle_means.shape != estimates.shape:
            raise ValueError("oracle series length mismatch")
        gap = manifold.distance(estimates, oracle_means)
        out["oracle_mean_abs_err"] = float(np.mean(np.abs(gap)))
        out["oracle_var_abs_err"] = float(np.mean(np.abs(variances - oracle_vars)))
    return out


# ---------------------------------------------------------------- artifacts


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain-float repr even for numpy scalars
    return str(value)


def write_metrics_csv(path: Path, rows: Sequence[MetricsRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    METRICS_SCHEMA_VERSION,
                    row.run_id,
                    row.seed,
                    row.filter_name,
                    row.status,
                    _format_value(row.mse),
                    _format_value(row.avg_posterior_variance),
                    _format_value(row.oracle_mean_abs_err),
                    _format_value(row.oracle_var_abs_err),
                    row.event_count,
                    _format_value(row.wall_clock_seconds),
                ]
            )


def write_trajectory_csv(path: Path, dt: float, estimates: np.ndarray,
                         variances: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "time", "estimate", "variance"])
        for k in range(estimates.shape[0]):
            writer.writerow(
                [k, repr((k + 1) * dt), repr(float(estimates[k, 0])),
                 repr(float(variances[k]))]
            )


def write_stream_csv(path: Path, truth: np.ndarray,
                     stream: ObservationStream) -> None:
    """Replayable record: state at each step boundary plus the counts
    observed during the step ending there (zeros on the first row)."""
    dim = truth.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        coord_cols = [f"x{i}" for i in range(dim)]
        count_cols = [f"count_{label}" for label in stream.labels]
        writer.writerow(["step", "time"] + coord_cols + count_cols)
        zeros = [0] * stream.n_channels
        for k in range(truth.shape[0]):
            counts = zeros if k == 0 else list(stream.counts[k - 1])
            writer.writerow(
                [k, repr(k * stream.dt)]
                + [repr(float(v)) for v in truth[k]]
                + [int(v) for v in counts]
            )


def read_stream_csv(path: Path, dt: float) -> tuple[np.ndarray, ObservationStream]:
    """Inverse of write_stream_csv."""
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        coord_idx = [i for i, name in enumerate(header) if name.startswith("x")]
        count_idx = [i for i, name in enumerate(header) if name.startswith("count_")]
        labels = tuple(header[i][len("count_"):] for i in count_idx)
        states, counts = [], []
        for row in reader:
            states.append([float(row[i]) for i in coord_idx])
            counts.append([int(row[i]) for i in count_idx])
    truth = np.asarray(states)
    stream = ObservationStream(dt=dt, counts=np.asarray(counts[1:]), labels=labels)
    return truth, stream


def write_snapshot_csv(path: Path, step: int, ens: ParticleEnsemble) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        dim = ens.positions.shape[1]
        writer.writerow(["step", "particle"] + [f"x{i}" for i in range(dim)]
                        + ["weight"])
        n = ens.size
        weights = ens.weights if ens.weights is not None else np.full(n, 1.0 / n)
        for i in range(n):
            writer.writerow(
                [step, i] + [repr(float(v)) for v in ens.positions[i]]
                + [repr(float(weights[i]))]
            )


def git_blob_sha1(data: bytes) -> str:
    header = f"blob {len(data)}\0".encode()
    return hashlib.sha1(header + data).hexdigest()


def _suffix(seed: int, repeats: int) -> str:
    return "" if repeats == 1 else f"_seed{seed}"


def run_experiment(
    cfg: ExperimentConfig,
    outdir: str | Path,
    config_source: bytes | None = None,
    oracle_only: bool = False,
) -> list[MetricsRow]:
    """Execute every repeat and filter, write all artifacts, return rows."""
    outdir = Path(outdir)
    traj_dir = outdir / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    snap_dir = outdir / "snapshots"

    rows: list[MetricsRow] = []
    run_infos = []
    problem = build_problem(cfg)
    manifold = problem.model.manifold
    filters = () if oracle_only else cfg.filters

    for run_id in range(cfg.repeats):
        seed = cfg.seed + run_id
        tag = _suffix(seed, cfg.repeats)
        truth_rng = derive_rng(seed, "truth")
        truth = simulate_truth(
            problem.model,
            problem.sample_x0(truth_rng),
            cfg.dt,
            cfg.steps,
            truth_rng,
        )
        stream = simulate_observations(
            problem.channels, truth, cfg.dt, derive_rng(seed, "observations")
        )
        event_count = int(stream.counts.sum())
        write_stream_csv(outdir / f"stream{tag}.csv", truth, stream)

        oracle_means = oracle_vars = None
        oracle_seconds = None
        if cfg.oracle or oracle_only:
            t0 = time.perf_counter()
            oracle_means, oracle_vars, final_density = run_oracle(
                problem, cfg, stream
            )
            oracle_seconds = time.perf_counter() - t0
            write_trajectory_csv(
                traj_dir / f"oracle{tag}.csv", cfg.dt, oracle_means, oracle_vars
            )
            final_density.write_csv(outdir / f"density{tag}.csv")

        init_positions = problem.sample_init(
            derive_rng(seed, "init"), cfg.particles
        )
        filter_seconds = {}
        for name in filters:
            runner = FILTER_RUNNERS[name]
            if name == "bpf":
                rng = {
                    "noise": derive_rng(seed, "bpf"),
                    "resample": derive_rng(seed, "resample"),
                }
            else:
                rng = derive_rng(seed, name)
            on_step = None
            if cfg.snapshot_every > 0 and name != "adf":
                this_dir = snap_dir / f"{name}{tag}"
                this_dir.mkdir(parents=True, exist_ok=True)

                def on_step(k, ens, _dir=this_dir):
                    if (k + 1) % cfg.snapshot_every == 0:
                        write_snapshot_csv(_dir / f"step_{k + 1:06d}.csv", k + 1, ens)

            t0 = time.perf_counter()
            try:
                if name == "adf":
                    est, var = runner(problem, cfg, stream, init_positions, rng)
                else:
                    est, var = runner(
                        problem, cfg, stream, init_positions, rng, on_step
                    )
                status = "ok"
            except Exception as exc:  # recorded per-row, not fatal to others
                est = var = None
                status = f"error: {type(exc).__name__}: {exc}"
            wall = time.perf_counter() - t0
            filter_seconds[name] = wall

            if est is None:
                metrics = {
                    "mse": None,
                    "avg_posterior_variance": None,
                    "oracle_mean_abs_err": None,
                    "oracle_var_abs_err": None,
                }
            else:
                metrics = compute_metrics(
                    manifold, truth, est, var, oracle_means, oracle_vars
                )
                write_trajectory_csv(
                    traj_dir / f"{name}{tag}.csv", cfg.dt, est, var
                )
            rows.append(
                MetricsRow(
                    run_id=run_id,
                    seed=seed,
                    filter_name=name,
                    status=status,
                    event_count=event_count,
                    wall_clock_seconds=wall,
                    **metrics,
                )
            )
        run_infos.append(
            {
                "run_id": run_id,
                "seed": seed,
                "event_count": event_count,
                "oracle_seconds": oracle_seconds,
                "filter_seconds": filter_seconds,
            }
        )

    write_metrics_csv(outdir / "metrics.csv", rows)
    manifest = {
        "schema_version": 1,
        "metrics_schema_version": METRICS_SCHEMA_VERSION,
        "package_version": __version__,
        "config": asdict(cfg),
        "config_blob_sha1": (
            git_blob_sha1(config_source) if config_source is not None else None
        ),
        "base_seed": cfg.seed,
        "runs": run_infos,
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return rows

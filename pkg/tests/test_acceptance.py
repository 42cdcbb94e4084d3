"""Acceptance gate: one test per release criterion, each printing a
PASS/FAIL line (run with -s to stream them; a report file is always
written next to the package). The heavy benchmark blocks are shared
session fixtures so each criterion reads from the same runs.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from ppfpf.config import ExperimentConfig
from ppfpf.dynamics import HiddenModel, IntensityChannel, simulate_observations, simulate_truth
from ppfpf.ensembles import ParticleEnsemble
from ppfpf.filters import (
    HomotopyConfig,
    bpf_step,
    ekspf_step,
    homotopy_transform,
    ppfpf_step,
)
from ppfpf.gain import GainSolverConfig, exact_gauss_linear, solve_E
from ppfpf.harness import build_problem, derive_rng, run_experiment
from ppfpf.manifolds import TWO_PI, Circle, EuclideanSpace
from ppfpf.oracle import GridDensity, grid_event_update, grid_moments, grid_predict_correct

REPORT_PATH = Path(__file__).resolve().parent.parent / "acceptance_report.txt"
_REPORT: list[str] = []


@pytest.fixture(scope="session", autouse=True)
def acceptance_report():
    _REPORT.clear()
    yield
    if _REPORT:
        REPORT_PATH.write_text("\n".join(_REPORT) + "\n")


def check(name: str, passed: bool, detail: str):
    line = f"[ACCEPTANCE] {name}: {'PASS' if passed else 'FAIL'} ({detail})"
    print(line)
    _REPORT.append(line)
    assert passed, line


# ------------------------------------------------------------ shared runs


@pytest.fixture(scope="session")
def fig2_block(tmp_path_factory):
    """Ten seeds of the line benchmark at acceptance scale, oracle on.

    1001 grid points instead of the 2001 default: the refinement test
    shows means move < 1e-3 under dx halving, and the explicit scheme's
    substep count scales with 1/dx^2.
    """
    cfg = ExperimentConfig(
        preset="fig2_ou",
        seed=1,
        steps=10_000,
        particles=4000,
        repeats=10,
        oracle_points=1001,
        gain=GainSolverConfig(bandwidth=0.5, regularization=1e-6, max_centers=64),
    )
    out = tmp_path_factory.mktemp("fig2_block")
    rows = run_experiment(cfg, out)
    manifest = json.loads((out / "manifest.json").read_text())
    by_seed = {}
    for row in rows:
        by_seed.setdefault(row.seed, {})[row.filter_name] = row
    return by_seed, manifest


@pytest.fixture(scope="session")
def circle_block(tmp_path_factory):
    """Ten seeds of the circle benchmark (truth-referenced, no oracle)."""
    cfg = ExperimentConfig(
        preset="fig3_circle",
        seed=1,
        steps=10_000,
        particles=200,
        repeats=10,
        oracle=False,
        filters=("ppfpf", "ekspf"),
        gain=GainSolverConfig(
            kernel="von_mises", concentration=0.1, regularization=1e-2,
            max_centers=64,
        ),
    )
    out = tmp_path_factory.mktemp("fig3_block")
    rows = run_experiment(cfg, out)
    by_seed = {}
    for row in rows:
        by_seed.setdefault(row.seed, {})[row.filter_name] = row
    return by_seed


# -------------------------------------------------------------- criteria


def test_jump_transform_exactness():
    rng = np.random.default_rng(42)
    ens = ParticleEnsemble(rng.normal(0, 1, (5000, 1)), EuclideanSpace(1))
    cfg = HomotopyConfig(
        n_steps=20, gain=GainSolverConfig(bandwidth=0.5, regularization=1e-6)
    )
    t0 = time.perf_counter()
    out = homotopy_transform(ens, lambda x: 2.0 * np.exp(x[:, 0]), cfg)
    elapsed = time.perf_counter() - t0
    mean = float(out.positions.mean())
    var = float(out.positions.var())
    check(
        "jump-transform exactness (Gaussian x exponential)",
        0.9 <= mean <= 1.1 and 0.85 <= var <= 1.15 and elapsed < 10.0,
        f"mean={mean:.4f} var={var:.4f} runtime={elapsed:.2f}s",
    )


def test_gain_solver_oracle_equivalence():
    exact = exact_gauss_linear(0.0, 1.0, 1.0)
    cfg = GainSolverConfig(bandwidth=2.0, regularization=1e-6, max_centers=128)
    t0 = time.perf_counter()
    rms = {2000: [], 8000: []}
    for n in rms:
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            ens = ParticleEnsemble(rng.normal(0, 1, (n, 1)), EuclideanSpace(1))
            sol = solve_E(ens, lambda x: x[:, 0], cfg)
            err = sol.vectors[:, 0] - exact
            rms[n].append(float(np.sqrt(np.mean(err * err))))
    elapsed = time.perf_counter() - t0
    worst_small = max(rms[2000])
    mean_small, mean_big = np.mean(rms[2000]), np.mean(rms[8000])
    check(
        "gain-solver oracle equivalence (Gaussian/linear)",
        worst_small < 0.1 and mean_big < mean_small and elapsed < 30.0,
        f"rms@2000 max={worst_small:.4f} mean={mean_small:.4f} "
        f"rms@8000 mean={mean_big:.4f} runtime={elapsed:.1f}s",
    )


def test_ppfpf_tracks_grid_oracle(fig2_block):
    by_seed, manifest = fig2_block
    row = by_seed[1]["ppfpf"]
    oracle_seconds = manifest["runs"][0]["oracle_seconds"]
    runtime = row.wall_clock_seconds + oracle_seconds
    check(
        "ppFPF tracks the grid oracle (line benchmark)",
        row.status == "ok"
        and row.oracle_mean_abs_err < 0.1
        and row.oracle_var_abs_err < 0.15
        and runtime < 600.0,
        f"mean_err={row.oracle_mean_abs_err:.4f} "
        f"var_err={row.oracle_var_abs_err:.4f} runtime={runtime:.0f}s",
    )


def test_uq_ordering(fig2_block):
    by_seed, _ = fig2_block
    wins = 0
    for seed, rows in by_seed.items():
        pp = rows["ppfpf"].oracle_var_abs_err
        if pp < rows["ekspf"].oracle_var_abs_err and pp < rows["adf"].oracle_var_abs_err:
            wins += 1
    check(
        "UQ ordering (ppFPF variance tracking beats EKSPF and ADF)",
        wins >= 8,
        f"wins={wins}/10",
    )


def test_ekspf_variance_artifact():
    # particle side: the event update translates, so the sample variance
    # cannot move; density side: the true Bayes update does change it
    rng = np.random.default_rng(3)
    ens = ParticleEnsemble(rng.normal(0, 1, (5000, 1)), EuclideanSpace(1))
    channel = IntensityChannel(
        h=lambda x: 2.0 * np.exp(x[:, 0]), label="exp", exp_form=(2.0, 1.0)
    )
    still = HiddenModel(
        manifold=EuclideanSpace(1), drift=lambda x: np.zeros_like(x), diffusion=[]
    )
    before = float(ens.positions[:, 0].var())
    moved = ekspf_step(ens, still, [channel], [1], 1e-9, np.empty((5000, 0)))
    after = float(moved.positions[:, 0].var())
    displacement = moved.positions - ens.positions
    common = float(np.max(np.abs(displacement - displacement[0])))

    grid = np.linspace(-8, 8, 2001)
    bimodal = np.exp(-0.5 * (grid + 2.0) ** 2 / 0.25) + np.exp(
        -0.5 * (grid - 2.0) ** 2 / 0.25
    )
    gd = GridDensity.from_values(grid, bimodal)
    _, var_prior = grid_moments(gd)
    _, var_post = grid_moments(grid_event_update(gd, channel.h))
    check(
        "EKSPF event update freezes sample variance; exact update does not",
        abs(after - before) <= 1e-12 * max(1.0, before)
        and common <= 1e-12
        and var_post < var_prior,
        f"|dvar|={abs(after - before):.2e} grid {var_prior:.3f}->{var_post:.3f}",
    )


def _rotated_circle_setup(c):
    def bump(i, offset=0.0):
        center = i * np.pi / 2.0 + offset
        return lambda x: 20.0 * np.exp(10.0 * (np.cos(x[:, 0] - center) - 1.0))

    base = [IntensityChannel(h=bump(i), label=f"b{i}") for i in (1, 2, 3, 4)]
    rotated = [
        IntensityChannel(h=bump(i, offset=c), label=f"b{i}") for i in (1, 2, 3, 4)
    ]
    model = HiddenModel(
        manifold=Circle(),
        drift=lambda x: np.zeros_like(x),
        diffusion=[lambda x: np.ones_like(x)],
    )
    return model, base, rotated


def _drive(step, positions, model, channels, counts_seq, noise_seq, **kw):
    circle = Circle()
    ens = ParticleEnsemble(positions, circle)
    for counts, noise in zip(counts_seq, noise_seq):
        ens = step(ens, model, channels, counts, 0.01, noise=noise, **kw)
    return ens.positions


def test_circle_chart_equivariance():
    c = 0.5
    model, base, rotated = _rotated_circle_setup(c)
    circle = Circle()
    rng = np.random.default_rng(5)
    theta = rng.uniform(0, TWO_PI, (100, 1))
    noise_seq = [rng.normal(0, 0.1, (100, 1)) for _ in range(6)]
    counts_seq = [
        [0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0],
        [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 0],
    ]
    gain = GainSolverConfig(
        kernel="von_mises", concentration=0.1, regularization=1e-2
    )
    hom = HomotopyConfig(n_steps=20, gain=gain)

    out = _drive(ppfpf_step, theta, model, base, counts_seq, noise_seq,
                 gain_cfg=gain, homotopy_cfg=hom)
    out_rot = _drive(ppfpf_step, circle.wrap(theta + c), model, rotated,
                     counts_seq, noise_seq, gain_cfg=gain, homotopy_cfg=hom)
    ppfpf_dev = float(np.max(circle.distance(out_rot, circle.wrap(out + c))))

    out_e = _drive(ekspf_step, theta, model, base, counts_seq, noise_seq)
    out_e_rot = _drive(ekspf_step, circle.wrap(theta + c), model, rotated,
                       counts_seq, noise_seq)
    ekspf_dev = float(np.max(circle.distance(out_e_rot, circle.wrap(out_e + c))))

    check(
        "circle chart-rotation equivariance (ppFPF yes, EKSPF no)",
        ppfpf_dev < 1e-8 and ekspf_dev > 1e-3,
        f"ppfpf_dev={ppfpf_dev:.2e} ekspf_dev={ekspf_dev:.2e}",
    )


def test_circle_benchmark_beats_naive_chart_filter(circle_block):
    wins = sum(
        1
        for rows in circle_block.values()
        if rows["ppfpf"].mse <= rows["ekspf"].mse
    )
    sample = next(iter(circle_block.values()))
    check(
        "circle benchmark: ppFPF circular MSE <= naive-chart EKSPF",
        wins >= 8,
        f"wins={wins}/10 (e.g. ppfpf={sample['ppfpf'].mse:.3f} "
        f"ekspf={sample['ekspf'].mse:.3f})",
    )


def test_conservation_suite():
    # bootstrap weights stay normalized through events and resampling
    cfg = ExperimentConfig(preset="fig2_ou", seed=5, steps=300, particles=100)
    problem = build_problem(cfg)
    rng_t = derive_rng(5, "truth")
    truth = simulate_truth(problem.model, problem.sample_x0(rng_t), 0.01, 300, rng_t)
    stream = simulate_observations(
        problem.channels, truth, 0.01, derive_rng(5, "observations")
    )
    n = 100
    ens = ParticleEnsemble(
        problem.sample_init(derive_rng(5, "init"), n),
        problem.model.manifold,
        np.full(n, 1.0 / n),
    )
    noise_rng = derive_rng(5, "bpf")
    resample_rng = derive_rng(5, "resample")
    worst_weight_gap = 0.0
    for k in range(300):
        noise = noise_rng.normal(0, 0.1, (n, 1))
        ens = bpf_step(ens, problem.model, problem.channels, stream.counts[k],
                       0.01, noise, resample_rng)
        worst_weight_gap = max(worst_weight_gap, abs(float(ens.weights.sum()) - 1.0))

    # grid density stays normalized through transport and events
    gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 401)
    worst_mass_gap = 0.0
    for k in range(200):
        gd = grid_predict_correct(gd, problem.model, problem.channels, 0.01)
        if stream.counts[k, 0]:
            gd = grid_event_update(gd, problem.channels[0].h)
        worst_mass_gap = max(worst_mass_gap, abs(gd.integral() - 1.0))

    # the event flow with a flat intensity is the identity
    rng = np.random.default_rng(6)
    ens2 = ParticleEnsemble(rng.normal(0, 1, (1000, 1)), EuclideanSpace(1))
    cfg2 = HomotopyConfig(
        n_steps=20, gain=GainSolverConfig(bandwidth=0.5, regularization=1e-6)
    )
    out = homotopy_transform(ens2, lambda x: np.full(x.shape[0], 4.0), cfg2)
    flow_gap = float(np.max(np.abs(out.positions - ens2.positions)))

    check(
        "conservation suite (weights, grid mass, flat-intensity flow)",
        worst_weight_gap <= 1e-9 and worst_mass_gap <= 1e-6 and flow_gap <= 1e-12,
        f"weight_gap={worst_weight_gap:.1e} mass_gap={worst_mass_gap:.1e} "
        f"flow_gap={flow_gap:.1e}",
    )

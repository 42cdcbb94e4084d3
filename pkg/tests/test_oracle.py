import numpy as np
import pytest

from ppfpf.dynamics import HiddenModel, IntensityChannel
from ppfpf.manifolds import TWO_PI, Circle, EuclideanSpace
from ppfpf.oracle import (
    CFLError,
    GridDensity,
    grid_circular_spread,
    grid_event_update,
    grid_moments,
    grid_predict_correct,
)


def ou_model():
    return HiddenModel(
        manifold=EuclideanSpace(1),
        drift=lambda x: -x,
        diffusion=[lambda x: np.full_like(x, np.sqrt(2.0))],
    )


def exp_channel(coef=2.0, slope=1.0):
    return IntensityChannel(
        h=lambda x: coef * np.exp(slope * x[:, 0]), label="exp",
        exp_form=(coef, slope),
    )


def still_model(manifold):
    return HiddenModel(
        manifold=manifold, drift=lambda x: np.zeros_like(x), diffusion=[]
    )


class TestPredictCorrect:
    def test_no_dynamics_constant_rate_is_identity(self):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 501)
        flat = IntensityChannel(h=lambda x: np.full(x.shape[0], 3.0), label="flat")
        out = grid_predict_correct(gd, still_model(EuclideanSpace(1)), [flat], 0.01)
        assert np.allclose(out.values, gd.values, atol=1e-12)

    def test_ou_variance_relaxation(self):
        # P(t) = 1 + (P0 - 1) e^{-2t}: from 0.25 to 1 - 0.75 e^{-4} at t=2
        gd = GridDensity.gaussian(0.0, 0.25, -8, 8, 2001)
        model = ou_model()
        for _ in range(200):
            gd = grid_predict_correct(gd, model, [], 0.01)
        _, var = grid_moments(gd)
        assert var == pytest.approx(1.0 - 0.75 * np.exp(-4.0), abs=1e-2)

    def test_circle_diffusion_mixes_to_uniform(self):
        # Fokker-Planck coefficient 1 (noise field sqrt(2)); mode-1 content
        # of the start decays as e^{-t}, so sup error < 1e-3 at t = 5
        model = HiddenModel(
            manifold=Circle(),
            drift=lambda x: np.zeros_like(x),
            diffusion=[lambda x: np.full_like(x, np.sqrt(2.0))],
        )
        points = 1001
        grid = np.arange(points) * (TWO_PI / points)
        gd = GridDensity.from_values(
            grid, (1.0 + 0.5 * np.cos(grid)) / TWO_PI, periodic=True
        )
        for _ in range(500):
            gd = grid_predict_correct(gd, model, [], 0.01)
        assert np.abs(gd.values - 1.0 / TWO_PI).max() < 1e-3

    def test_mass_conserved_and_positive(self):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 801)
        model = ou_model()
        for _ in range(50):
            out = grid_predict_correct(gd, model, [], 0.01)
            assert out.integral() == pytest.approx(1.0, abs=1e-6)
            assert out.mass_drift < 1e-8  # pre-renormalization leakage
            assert np.all(out.values >= 0)
            gd = out

    def test_periodic_mass_drift_is_machine_level(self):
        model = HiddenModel(
            manifold=Circle(),
            drift=lambda x: np.cos(x),
            diffusion=[lambda x: np.ones_like(x)],
        )
        gd = GridDensity.uniform_circle(501)
        for _ in range(20):
            gd = grid_predict_correct(gd, model, [], 0.01)
            assert gd.mass_drift < 1e-12

    def test_density_csv_snapshot(self, tmp_path):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 201)
        path = tmp_path / "density.csv"
        gd.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,p"
        assert len(lines) == 202
        x0, p0 = lines[1].split(",")
        assert float(x0) == -8.0
        assert float(p0) == gd.values[0]

    def test_cfl_budget_enforced(self):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 2001)
        with pytest.raises(CFLError):
            grid_predict_correct(gd, ou_model(), [], 0.01, max_substeps=10)

    def test_grid_refinement_stability(self):
        # halving dx moves the posterior mean by < 1e-3
        model = ou_model()
        channel = exp_channel()
        rng = np.random.default_rng(0)
        counts = rng.random(300) < 0.03
        means = {}
        for points in (1001, 2001):
            gd = GridDensity.gaussian(0.0, 1.0, -8, 8, points)
            for k in range(300):
                gd = grid_predict_correct(gd, model, [channel], 0.01)
                if counts[k]:
                    gd = grid_event_update(gd, channel.h)
            means[points] = grid_moments(gd)[0]
        assert abs(means[1001] - means[2001]) < 1e-3


class TestEventUpdate:
    def test_constant_intensity_is_identity(self):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 501)
        out = grid_event_update(gd, lambda x: np.full(x.shape[0], 9.0))
        assert np.allclose(out.values, gd.values, atol=1e-14)

    def test_gaussian_exponential_conjugacy(self):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 2001)
        out = grid_event_update(gd, exp_channel().h)
        mean, var = grid_moments(out)
        assert mean == pytest.approx(1.0, abs=1e-3)
        assert var == pytest.approx(1.0, abs=1e-3)

    def test_circle_bump_posterior_mode(self):
        gd = GridDensity.uniform_circle(2001)
        h1 = lambda x: 20.0 * np.exp(10.0 * (np.cos(x[:, 0] - np.pi / 2) - 1.0))
        out = grid_event_update(gd, h1)
        mode = out.grid[np.argmax(out.values)]
        assert mode == pytest.approx(np.pi / 2, abs=0.01)

    def test_nonpositive_intensity_rejected(self):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 501)
        with pytest.raises(ValueError):
            grid_event_update(gd, lambda x: np.zeros(x.shape[0]))


class TestMoments:
    def test_symmetric_density_zero_mean(self):
        gd = GridDensity.gaussian(0.0, 1.0, -8, 8, 2001)
        mean, _ = grid_moments(gd)
        assert abs(mean) < 1e-9

    def test_gaussian_quadrature_accuracy(self):
        gd = GridDensity.gaussian(2.0, 0.5, -8, 8, 2001)
        mean, var = grid_moments(gd)
        assert mean == pytest.approx(2.0, abs=1e-4)
        assert var == pytest.approx(0.5, abs=1e-4)

    def test_uniform_circle_has_unit_circular_variance(self):
        gd = GridDensity.uniform_circle(1001)
        _, circ_var = grid_moments(gd)
        assert circ_var == pytest.approx(1.0, abs=1e-9)

    def test_circular_spread_of_uniform(self):
        # integral of squared distance to any point: pi^2 / 3
        gd = GridDensity.uniform_circle(2001)
        assert grid_circular_spread(gd, 1.0) == pytest.approx(np.pi**2 / 3, abs=1e-3)


class TestGridDensity:
    def test_normalization_invariant(self):
        grid = np.linspace(-3, 3, 301)
        gd = GridDensity.from_values(grid, np.exp(-np.abs(grid)))
        assert gd.integral() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_negative_values(self):
        grid = np.linspace(-1, 1, 101)
        values = np.ones(101)
        values[3] = -0.5
        with pytest.raises(ValueError):
            GridDensity(grid, values)

    def test_rejects_empty_mass(self):
        grid = np.linspace(-1, 1, 101)
        with pytest.raises(ValueError):
            GridDensity.from_values(grid, np.zeros(101))

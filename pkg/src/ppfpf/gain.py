"""Gain estimation: vector fields V solving L_V mu = -(phi - mean(phi)) mu.

Written against an empirical particle measure mu_N and the gradient
ansatz V = grad f, the equation becomes the weighted Poisson equation
div(p grad f) = -(phi - mean(phi)) p. The kernel-Galerkin solver
represents f in the span of kernels centered at (a subset of) the
particles and minimizes the empirical variational objective

    (1/N) sum_i [ |grad f(S_i)|^2 / 2 - (phi(S_i) - mean(phi)) f(S_i) ]
        + lambda * a' K a,

whose normal equations are the linear system solved here. A constant
(parallel) field is available on Euclidean space only: on the circle a
nonzero constant field is not the gradient of any smooth function, so
the constant approximation is rejected there.

Kernel conventions:
    Gaussian on R^n:   k(x, y) = exp(-|x - y|^2 / (4 eps))
        so eps has diffusion-time units; eps = 10 is a wide kernel.
    von Mises on S^1:  k(a, b) = exp(kappa (cos(a - b) - 1))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import ParticleEnsemble
from .manifolds import Circle, EuclideanSpace

METHODS = ("kernel_galerkin", "constant_gain", "exact_gauss_linear")
KERNELS = ("gaussian", "von_mises")


class GainSolverError(RuntimeError):
    """Linear system could not be solved (singular even after jitter)."""


class UnsupportedManifoldError(ValueError):
    """Requested gain representation does not exist on this manifold."""


@dataclass(frozen=True)
class GainSolverConfig:
    """Method and kernel hyperparameters for solve_E.

    bandwidth is the Gaussian eps, concentration the von Mises kappa.
    regularization is the ridge weight on the RKHS norm, jitter an
    absolute diagonal guard against coincident particles. max_centers
    caps the number of Galerkin centers (an index-strided subset of the
    particles); None keeps every particle as a center.
    """

    method: str = "kernel_galerkin"
    kernel: str = "gaussian"
    bandwidth: float = 0.5
    concentration: float = 1.0
    regularization: float = 1e-6
    jitter: float = 1e-10
    max_centers: int | None = 64

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")
        if self.kernel == "gaussian" and self.bandwidth <= 0:
            raise ValueError("gaussian bandwidth must be positive")
        if self.kernel == "von_mises" and self.concentration <= 0:
            raise ValueError("von Mises concentration must be positive")
        if self.regularization < 0 or self.jitter < 0:
            raise ValueError("regularization and jitter must be nonnegative")
        if self.max_centers is not None and self.max_centers < 1:
            raise ValueError("max_centers must be None or >= 1")

    def lengthscale(self) -> float:
        """Distance over which the kernel decays by one standard unit."""
        if self.kernel == "gaussian":
            return float(np.sqrt(2.0 * self.bandwidth))
        return float(1.0 / np.sqrt(self.concentration))


@dataclass
class GainSolution:
    """Gain vectors at the particles plus the Galerkin diagnostics."""

    vectors: np.ndarray        # (N, dim)
    coefficients: np.ndarray   # (m,) Galerkin weights; empty for constants
    residual: float            # |G a - c| / max(|c|, 1e-15)


def _check_kernel_manifold(config: GainSolverConfig, manifold) -> None:
    if isinstance(manifold, Circle) and config.kernel != "von_mises":
        raise ValueError("the circle requires the von Mises kernel")
    if isinstance(manifold, EuclideanSpace) and config.kernel != "gaussian":
        raise ValueError("Euclidean space requires the Gaussian kernel")


def _gaussian_eval(x: np.ndarray, centers: np.ndarray, eps: float,
                   need_grad: bool = True):
    """Kernel matrix (N, m) and, per dimension, its x-gradient (N, m)."""
    dim = x.shape[1]
    deltas = [x[:, d][:, None] - centers[:, d][None, :] for d in range(dim)]
    sq = deltas[0] * deltas[0]
    for delta in deltas[1:]:
        sq += delta * delta
    sq *= -0.25 / eps
    k = np.exp(sq, out=sq)
    if not need_grad:
        return k, None
    grads = []
    for delta in deltas:
        np.multiply(delta, k, out=delta)
        delta *= -0.5 / eps
        grads.append(delta)
    return k, grads


def _von_mises_eval(x: np.ndarray, centers: np.ndarray, kappa: float,
                    need_grad: bool = True):
    delta = x[:, 0][:, None] - centers[:, 0][None, :]
    arg = np.cos(delta)
    arg -= 1.0
    arg *= kappa
    k = np.exp(arg, out=arg)
    if not need_grad:
        return k, None
    grad = np.sin(delta, out=delta)
    np.multiply(grad, k, out=grad)
    grad *= -kappa
    return k, [grad]


def _kernel_eval(x, centers, config: GainSolverConfig, need_grad: bool = True):
    if config.kernel == "gaussian":
        return _gaussian_eval(x, centers, config.bandwidth, need_grad)
    return _von_mises_eval(x, centers, config.concentration, need_grad)


_CENTER_CACHE: dict[tuple[int, int | None], np.ndarray] = {}


def _center_indices(n: int, max_centers: int | None) -> np.ndarray:
    """Deterministic index-strided subset of the particles as centers."""
    cached = _CENTER_CACHE.get((n, max_centers))
    if cached is None:
        if max_centers is None or max_centers >= n:
            cached = np.arange(n)
        else:
            cached = np.unique(
                np.round(np.linspace(0, n - 1, max_centers)).astype(int)
            )
        _CENTER_CACHE[(n, max_centers)] = cached
    return cached


def _phi_values(particles: ParticleEnsemble, phi) -> np.ndarray:
    values = np.asarray(phi(particles.positions), dtype=float)
    if values.shape != (particles.size,):
        raise ValueError("phi must map (N, dim) positions to (N,) values")
    if not np.all(np.isfinite(values)):
        raise ValueError("phi must be finite at every particle")
    return values


def solve_E(particles: ParticleEnsemble, phi, config: GainSolverConfig) -> GainSolution:
    """Estimate the vector field solving L_V mu_N = -(phi - mean phi) mu_N.

    The kernel-Galerkin method assembles, for centers S_j,

        G_jl = (1/N) sum_i  grad_1 k(S_i, S_j) . grad_1 k(S_i, S_l)
        c_j  = (1/N) sum_i (phi(S_i) - mean phi) k(S_i, S_j)

    solves (G + lambda K + delta I) a = c, and reports
    V(S_i) = sum_j a_j grad_1 k(S_i, S_j).
    """
    x = particles.positions
    n, dim = x.shape
    phi_vals = _phi_values(particles, phi)

    if config.method in ("constant_gain", "exact_gauss_linear"):
        if not isinstance(particles.manifold, EuclideanSpace):
            raise UnsupportedManifoldError(
                "constant-field gains are only defined on Euclidean space"
            )
        # Both reduce to the sample covariance Cov(x, phi): it is the
        # mu_N-average of any solution of the field equation, and equals
        # var*slope exactly for Gaussian samples and linear phi.
        centered = phi_vals - phi_vals.mean()
        constant = x.T @ centered / n
        vectors = np.broadcast_to(constant, (n, dim)).copy()
        return GainSolution(vectors=vectors, coefficients=np.empty(0), residual=0.0)

    _check_kernel_manifold(config, particles.manifold)
    if n < 2 or np.ptp(phi_vals) == 0.0:
        # right-hand side vanishes identically: the zero field solves it
        m = len(_center_indices(n, config.max_centers))
        return GainSolution(
            vectors=np.zeros_like(x), coefficients=np.zeros(m), residual=0.0
        )

    centered = phi_vals - phi_vals.mean()
    idx = _center_indices(n, config.max_centers)
    centers = x[idx]
    m = len(idx)
    k_mat, k_grads = _kernel_eval(x, centers, config)

    c = k_mat.T @ centered / n
    gram = k_grads[0].T @ k_grads[0]
    for gd in k_grads[1:]:
        gram += gd.T @ gd
    gram /= n

    k_centers, _ = _kernel_eval(centers, centers, config, need_grad=False)
    system = gram + config.regularization * k_centers
    system[np.diag_indices_from(system)] += config.jitter
    try:
        coeff = np.linalg.solve(system, c)
    except np.linalg.LinAlgError as exc:
        raise GainSolverError(f"gain linear system is singular: {exc}") from exc
    if not np.all(np.isfinite(coeff)):
        raise GainSolverError("gain linear system produced non-finite weights")

    residual = float(
        np.linalg.norm(gram @ coeff - c) / max(np.linalg.norm(c), 1e-15)
    )
    vectors = np.empty((n, dim))
    for d in range(dim):
        vectors[:, d] = k_grads[d] @ coeff
    return GainSolution(vectors=vectors, coefficients=coeff, residual=residual)


def constant_gain(particles: ParticleEnsemble, phi) -> np.ndarray:
    """Sample constant gain (1/N) sum_i S_i (mean phi - phi(S_i)).

    With phi = -h this is the empirical covariance of position with the
    intensity, the quantity the constant-gain filters translate by.
    Euclidean manifolds only: on the circle the constant approximation
    requires an inestimable correction involving the exact gain.
    """
    if not isinstance(particles.manifold, EuclideanSpace):
        raise UnsupportedManifoldError(
            "constant gain is not defined on the circle"
        )
    phi_vals = _phi_values(particles, phi)
    centered = phi_vals.mean() - phi_vals
    return particles.positions.T @ centered / particles.size


def exact_gauss_linear(mean: float, var: float, slope: float) -> float:
    """Exact gain for a 1-D Gaussian density and linear observation map.

    Solves div(p K) = -(h - mean h) p for p = N(mean, var) and
    h(x) = slope*x: the solution is the constant var*slope (the Kalman
    gain). Intended as a test oracle for the numerical solvers.
    """
    if var <= 0:
        raise ValueError("variance must be positive")
    del mean  # the gain of a linear map does not depend on the location
    return var * slope

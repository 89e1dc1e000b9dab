"""Probabilistic view of match kernels: weighted kernel density estimators,
the averaged Gaussian match kernel between descriptor sets, its product-kernel
form, and the equalization weights that flatten a KDE at its own samples.

A descriptor set X with match-kernel bandwidth sigma induces the density
p(x) = (1/M) sum_i k_{sigma/sqrt(2)}(x, x_i); the product integral of two such
densities at rho = 1 is proportional to the averaged pairwise kernel at
bandwidth sigma. Callers supply KDE bandwidths explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .encoders import DescriptorSet
from .pooling import PatchWeights, gmp_dual_weights

__all__ = [
    "Kde",
    "QuadratureError",
    "kde_eval",
    "kde_eval_grid",
    "gmk",
    "ppk",
    "default_ppk_grid",
    "equalization_weights",
    "flatness_profile",
]

_DEFAULT_GRID_POINTS = 10_001
_GRID_PAD_BANDWIDTHS = 5.0


class QuadratureError(ValueError):
    """The quadrature grid is too coarse for the requested integral."""


@dataclass(frozen=True)
class Kde:
    """Weighted Gaussian kernel density estimator.

    Weights default to uniform 1/M and are not required to sum to one; the
    weighted function is not necessarily a distribution.
    """

    samples: np.ndarray
    bandwidth: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError(f"samples must be (M, d), got {samples.shape}")
        object.__setattr__(self, "samples", samples)
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        m = samples.shape[0]
        if self.weights is None:
            weights = np.full(m, 1.0 / m)
        else:
            weights = np.asarray(self.weights, dtype=np.float64).ravel()
            if weights.size != m:
                raise ValueError(f"{weights.size} weights for {m} samples")
            if not np.all(np.isfinite(weights)):
                raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def kde_eval(p: Kde, x) -> float:
    """Weighted kernel sum at a single point."""
    return float(kde_eval_grid(p, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def kde_eval_grid(p: Kde, points: np.ndarray) -> np.ndarray:
    """Weighted kernel sums at many points: sum_i w_i k_bw(point, x_i)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] == 0:
        return np.empty(0)
    if points.shape[1] != p.dim:
        raise ValueError(f"point dim {points.shape[1]} != KDE dim {p.dim}")
    kmat = kernels.gaussian_kernel_matrix(points, p.samples, p.bandwidth)
    return kmat @ p.weights


def gmk(x: DescriptorSet, y: DescriptorSet, sigma: float) -> float:
    """Averaged pairwise Gaussian kernel between two descriptor sets.

    Uses an exactly-rounded summation so the value is bitwise symmetric in
    its arguments.
    """
    if x.dim != y.dim:
        raise ValueError(f"descriptor dims differ: {x.dim} vs {y.dim}")
    kmat = kernels.gaussian_kernel_matrix(x.descriptors, y.descriptors, sigma)
    return math.fsum(kmat.ravel().tolist()) / (x.n * y.n)


def default_ppk_grid(p: Kde, q: Kde, points: int = _DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform 1-d grid spanning both sample sets plus five bandwidths."""
    pad = _GRID_PAD_BANDWIDTHS * max(p.bandwidth, q.bandwidth)
    lo = min(p.samples.min(), q.samples.min()) - pad
    hi = max(p.samples.max(), q.samples.max()) + pad
    return np.linspace(lo, hi, points)


def ppk(
    p: Kde,
    q: Kde,
    rho: float,
    grid: np.ndarray | None = None,
    rtol: float = 1e-6,
) -> float:
    """Product integral of two 1-d densities: integral of p^rho * q^rho.

    Trapezoidal quadrature on ``grid`` (default one is built from the sample
    ranges). The grid step is halved once as a convergence check; a relative
    change above ``rtol`` raises :class:`QuadratureError`. Returns the value
    on the refined grid.
    """
    if p.dim != 1 or q.dim != 1:
        raise ValueError("product-kernel quadrature supports 1-d densities only")
    if rho <= 0:
        raise ValueError("rho must be positive")
    if grid is None:
        grid = default_ppk_grid(p, q)
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size < 3:
        raise ValueError("grid must contain at least 3 points")

    def integrate(g: np.ndarray) -> float:
        vals = kde_eval_grid(p, g) ** rho * kde_eval_grid(q, g) ** rho
        return float(np.trapezoid(vals, g))

    coarse = integrate(grid)
    fine_grid = np.sort(np.concatenate([grid, (grid[:-1] + grid[1:]) / 2.0]))
    fine = integrate(fine_grid)
    if abs(fine - coarse) > rtol * max(abs(fine), 1e-12):
        raise QuadratureError(
            f"quadrature not converged: step halving moved the integral from "
            f"{coarse!r} to {fine!r}; refine the grid"
        )
    return fine


def equalization_weights(x: DescriptorSet, sigma: float, lam: float) -> PatchWeights:
    """Weights making the weighted kernel sum equal 1 at every sample.

    Builds K_ij = exp(-||x_i - x_j||^2 / (2 sigma^2)) and solves
    (K + lam I) w = 1. With lam = 0 the samples must be distinct, otherwise
    the kernel matrix is singular and the solve raises.
    """
    k = kernels.gaussian_kernel_matrix(x.descriptors, x.descriptors, sigma)
    return gmp_dual_weights(k, lam)


def flatness_profile(
    x: DescriptorSet, weights: PatchWeights, sigma: float, grid: np.ndarray
) -> np.ndarray:
    """Weighted kernel sum over a 1-d grid: sum_j w_j k_sigma(g, x_j).

    With equalization weights at lam = 0 this evaluates to 1 at every sample
    position.
    """
    if x.dim != 1:
        raise ValueError("flatness profiles are 1-d only")
    if weights.n != x.n:
        raise ValueError(f"{weights.n} weights for {x.n} samples")
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0:
        return np.empty(0)
    kde = Kde(x.descriptors, bandwidth=sigma, weights=weights.alpha)
    return kde_eval_grid(kde, grid)

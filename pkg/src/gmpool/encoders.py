"""Per-patch encoders: hard BOV, VLAD, hard-assignment Fisher, random-feature
cosine embeddings, plus the Gaussian kernel they all relate to.

Encodings are returned as D x N matrices (one column per descriptor). The
vocabulary-based encoders are block-sparse: each column lives entirely inside
the block of its assigned centroid/Gaussian, which downstream solvers exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "DescriptorSet",
    "Codebook",
    "GmmModel",
    "EmkParams",
    "EncodingMatrix",
    "encode_bov_hard",
    "encode_vlad",
    "encode_fv_hard",
    "encode_emk",
    "gaussian_kernel",
    "histogram",
]


@dataclass(frozen=True)
class DescriptorSet:
    """A set of N d-dimensional local descriptors, optionally with patch
    rectangles (x, y, width, height) in pixels."""

    descriptors: np.ndarray
    geometry: np.ndarray | None = None

    def __post_init__(self):
        desc = np.atleast_2d(np.asarray(self.descriptors, dtype=np.float64))
        object.__setattr__(self, "descriptors", desc)
        if desc.ndim != 2 or desc.shape[0] < 1 or desc.shape[1] < 1:
            raise ValueError(f"descriptors must be (N>=1, d>=1), got {desc.shape}")
        if self.geometry is not None:
            geom = np.asarray(self.geometry, dtype=np.float64)
            if geom.shape != (desc.shape[0], 4):
                raise ValueError(
                    f"geometry must be (N, 4), got {geom.shape} for N={desc.shape[0]}"
                )
            if np.any(geom[:, 2:] < 0):
                raise ValueError("patch sizes must be non-negative")
            object.__setattr__(self, "geometry", geom)

    @property
    def n(self) -> int:
        return self.descriptors.shape[0]

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]


@dataclass(frozen=True)
class Codebook:
    """C centroids of dimension d, pairwise distinct."""

    centroids: np.ndarray

    def __post_init__(self):
        cents = np.atleast_2d(np.asarray(self.centroids, dtype=np.float64))
        object.__setattr__(self, "centroids", cents)
        if cents.size == 0 or cents.shape[0] < 1:
            raise ValueError("codebook must contain at least one centroid")
        if np.unique(cents, axis=0).shape[0] != cents.shape[0]:
            raise ValueError("codebook centroids must be pairwise distinct")

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class GmmModel:
    """Diagonal-covariance Gaussian mixture: means, variances, weights."""

    means: np.ndarray
    variances: np.ndarray
    mixture_weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        weights = np.asarray(self.mixture_weights, dtype=np.float64).ravel()
        if variances.shape != means.shape:
            raise ValueError("means and variances must have matching shapes")
        if weights.size != means.shape[0]:
            raise ValueError("one mixture weight per Gaussian required")
        if np.any(variances <= 0):
            raise ValueError("variances must be strictly positive")
        if np.any(weights <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {weights.sum()}, expected 1")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "mixture_weights", weights)

    @property
    def size(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class EmkParams:
    """Seeded random-feature configuration for the cosine embedding.

    Directions and phases are drawn lazily by :meth:`draw`, deterministically
    from ``seed``: directions ~ Normal(0, I / sigma^2), phases ~ U[0, 2pi).
    """

    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def draw(self, dim: int, out_dim: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        directions = rng.normal(0.0, 1.0 / self.sigma, size=(out_dim, dim))
        phases = rng.uniform(0.0, 2.0 * math.pi, size=out_dim)
        return directions, phases


@dataclass(frozen=True)
class EncodingMatrix:
    """D x N matrix of per-patch encodings, optionally block-sparse.

    When ``block_size`` is set, ``column_blocks[n]`` names the block holding
    all the nonzeros of column n, and D must be a multiple of ``block_size``.
    """

    phi: np.ndarray
    block_size: int | None = None
    column_blocks: np.ndarray | None = None

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=np.float64))
        object.__setattr__(self, "phi", phi)
        if (self.block_size is None) != (self.column_blocks is None):
            raise ValueError("block_size and column_blocks must be set together")
        if self.block_size is not None:
            d, n = phi.shape
            if d % self.block_size != 0:
                raise ValueError(
                    f"D={d} not divisible by block size {self.block_size}"
                )
            blocks = np.asarray(self.column_blocks, dtype=np.int64)
            if blocks.shape != (n,):
                raise ValueError("column_blocks must have one entry per column")
            n_blocks = d // self.block_size
            if blocks.size and (blocks.min() < 0 or blocks.max() >= n_blocks):
                raise ValueError("column block ids out of range")
            object.__setattr__(self, "column_blocks", blocks)
            self._check_block_support()

    def _check_block_support(self):
        bs = self.block_size
        for b in range(self.n_blocks):
            cols = self.column_blocks == b
            if not np.any(cols):
                continue
            sub = self.phi[:, cols]
            outside = np.delete(sub, slice(b * bs, (b + 1) * bs), axis=0)
            if np.any(outside != 0):
                raise ValueError(f"columns assigned to block {b} have support outside it")

    @property
    def d(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def n_blocks(self) -> int:
        if self.block_size is None:
            raise ValueError("encoding has no block structure")
        return self.d // self.block_size


def gaussian_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """exp(-||x - y||^2 / (2 sigma^2)); equals 1 when x == y."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    d2 = float(np.sum((x - y) ** 2))
    return math.exp(-d2 / (2.0 * sigma * sigma))


def _assign(x: DescriptorSet, cb: Codebook) -> np.ndarray:
    if x.dim != cb.dim:
        raise ValueError(f"descriptor dim {x.dim} != codebook dim {cb.dim}")
    return kernels.nearest_centroids(x.descriptors, cb.centroids)


def encode_bov_hard(x: DescriptorSet, cb: Codebook) -> EncodingMatrix:
    """Hard bag-of-words: column n is the indicator of the nearest centroid."""
    idx = _assign(x, cb)
    phi = np.zeros((cb.size, x.n))
    phi[idx, np.arange(x.n)] = 1.0
    return EncodingMatrix(phi, block_size=1, column_blocks=idx)


def encode_vlad(x: DescriptorSet, cb: Codebook) -> EncodingMatrix:
    """Residual encoding: column n holds x_n - mu_i in the block of its
    nearest centroid i, zeros elsewhere (D = C * d)."""
    idx = _assign(x, cb)
    d = cb.dim
    phi = np.zeros((cb.size * d, x.n))
    residuals = x.descriptors - cb.centroids[idx]
    rows = (idx[:, None] * d + np.arange(d)).ravel()
    cols = np.repeat(np.arange(x.n), d)
    phi[rows, cols] = residuals.ravel()
    return EncodingMatrix(phi, block_size=d, column_blocks=idx)


def _log_posteriors(x: DescriptorSet, gmm: GmmModel) -> np.ndarray:
    # log w_k - 0.5 * sum_d [log(2 pi var) + (x - mu)^2 / var], up to a
    # shared constant; only the argmax is consumed.
    diff2 = (x.descriptors[:, None, :] - gmm.means[None, :, :]) ** 2
    maha = np.sum(diff2 / gmm.variances[None, :, :], axis=2)
    log_det = np.sum(np.log(gmm.variances), axis=1)
    return np.log(gmm.mixture_weights)[None, :] - 0.5 * (maha + log_det[None, :])


def encode_fv_hard(x: DescriptorSet, gmm: GmmModel) -> EncodingMatrix:
    """Hard-assignment Fisher-style encoding (D = 2 * G * d).

    Column n is nonzero only in the block of the Gaussian k with the highest
    posterior; the block stacks the mean gradient (x - mu_k) / sigma_k over
    the variance gradient ((x - mu_k)^2 / sigma_k^2 - 1) / sqrt(2), both
    scaled by 1 / sqrt(w_k).
    """
    if x.dim != gmm.dim:
        raise ValueError(f"descriptor dim {x.dim} != GMM dim {gmm.dim}")
    idx = np.argmax(_log_posteriors(x, gmm), axis=1).astype(np.int64)
    d = gmm.dim
    sigma = np.sqrt(gmm.variances[idx])
    scale = 1.0 / np.sqrt(gmm.mixture_weights[idx])[:, None]
    u = (x.descriptors - gmm.means[idx]) / sigma
    grad_mean = scale * u
    grad_var = scale * (u * u - 1.0) / math.sqrt(2.0)

    phi = np.zeros((2 * gmm.size * d, x.n))
    base = idx[:, None] * 2 * d
    mean_rows = (base + np.arange(d)).ravel()
    var_rows = (base + d + np.arange(d)).ravel()
    cols = np.repeat(np.arange(x.n), d)
    phi[mean_rows, cols] = grad_mean.ravel()
    phi[var_rows, cols] = grad_var.ravel()
    return EncodingMatrix(phi, block_size=2 * d, column_blocks=idx)


def encode_emk(x: DescriptorSet, params: EmkParams, out_dim: int) -> EncodingMatrix:
    """Random-feature cosine embedding approximating the Gaussian kernel.

    Column n is sqrt(2/D) * cos(directions @ x_n + phases), so that
    phi(x)^T phi(y) concentrates around exp(-||x-y||^2 / (2 sigma^2)).
    Dense: no block structure.
    """
    if out_dim < 2 or out_dim % 2 != 0:
        raise ValueError(f"output dimension must be even and >= 2, got {out_dim}")
    directions, phases = params.draw(x.dim, out_dim)
    proj = directions @ x.descriptors.T + phases[:, None]
    phi = math.sqrt(2.0 / out_dim) * np.cos(proj)
    return EncodingMatrix(phi)


def histogram(x: DescriptorSet, cb: Codebook) -> np.ndarray:
    """Occurrence counts of nearest-centroid assignments (length C, sums to N)."""
    idx = _assign(x, cb)
    return np.bincount(idx, minlength=cb.size).astype(np.int64)

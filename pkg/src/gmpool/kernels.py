"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

Every kernel here has two interchangeable implementations: a ``_nb`` variant
compiled with ``numba.njit`` and a ``_np`` fallback built on numpy array ops.
The public wrappers pick one at import time:

* numba is used when it imports cleanly and ``GMP_POOL_NUMBA`` is unset or
  truthy ("1", "true", "on");
* setting ``GMP_POOL_NUMBA=0`` forces the numpy path.

``benchmarks/kernel_bench.py`` times the two paths side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("GMP_POOL_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off")


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via GMP_POOL_NUMBA instead
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAVE_NUMBA and _numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"

# Cap on temporary memory for the chunked numpy distance fallback, in floats.
_CHUNK_FLOATS = 4_000_000


# ---------------------------------------------------------------------------
# pairwise squared distances
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pairwise_sq_dists_nb(x, y):
    m, d = x.shape
    n = y.shape[0]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for k in range(d):
                t = x[i, k] - y[j, k]
                acc += t * t
            out[i, j] = acc
    return out


def _pairwise_sq_dists_np(x, y):
    # Direct differences (chunked) rather than the x^2+y^2-2xy expansion,
    # which loses precision for nearby points.
    m, d = x.shape
    n = y.shape[0]
    out = np.empty((m, n))
    step = max(1, _CHUNK_FLOATS // max(1, n * d))
    for s in range(0, m, step):
        diff = x[s : s + step, None, :] - y[None, :, :]
        out[s : s + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of ``x`` (m,d) and ``y`` (n,d)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError(
            f"incompatible shapes for pairwise distances: {x.shape} vs {y.shape}"
        )
    if USE_NUMBA:
        return _pairwise_sq_dists_nb(x, y)
    return _pairwise_sq_dists_np(x, y)


def gaussian_kernel_matrix(x: np.ndarray, y: np.ndarray, sigma: float) -> np.ndarray:
    """Matrix of exp(-||x_i - y_j||^2 / (2 sigma^2)) values."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d2 = pairwise_sq_dists(x, y)
    return np.exp(d2 / (-2.0 * sigma * sigma))


# ---------------------------------------------------------------------------
# nearest-centroid assignment
# ---------------------------------------------------------------------------


@njit(cache=True)
def _nearest_centroids_nb(x, c):
    n, d = x.shape
    k = c.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = 0
        best_d = math.inf
        for j in range(k):
            acc = 0.0
            for t in range(d):
                diff = x[i, t] - c[j, t]
                acc += diff * diff
            if acc < best_d:  # strict: ties keep the lowest index
                best_d = acc
                best = j
        out[i] = best
    return out


def _nearest_centroids_np(x, c):
    # np.argmin returns the first minimizer, matching the lowest-index tie rule.
    return np.argmin(_pairwise_sq_dists_np(x, c), axis=1).astype(np.int64)


def nearest_centroids(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid per point; ties break to the lowest index."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    if points.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"descriptor dim {points.shape[1]} != centroid dim {centroids.shape[1]}"
        )
    if USE_NUMBA:
        return _nearest_centroids_nb(points, centroids)
    return _nearest_centroids_np(points, centroids)


# ---------------------------------------------------------------------------
# per-block Gram assembly for block-sparse encodings
# ---------------------------------------------------------------------------


@njit(cache=True)
def _block_grams_nb(phi, col_blocks, n_blocks, block_size):
    out = np.zeros((n_blocks, block_size, block_size))
    for n in range(col_blocks.size):
        b = col_blocks[n]
        base = b * block_size
        for i in range(block_size):
            vi = phi[base + i, n]
            for j in range(block_size):
                out[b, i, j] += vi * phi[base + j, n]
    return out


def _block_grams_np(phi, col_blocks, n_blocks, block_size):
    out = np.zeros((n_blocks, block_size, block_size))
    for b in range(n_blocks):
        cols = np.nonzero(col_blocks == b)[0]
        if cols.size:
            sub = phi[b * block_size : (b + 1) * block_size, cols]
            out[b] = sub @ sub.T
    return out


def block_grams(
    phi: np.ndarray, col_blocks: np.ndarray, n_blocks: int, block_size: int
) -> np.ndarray:
    """Per-block Gram matrices of a block-sparse encoding matrix.

    Column ``n`` is assumed zero outside block ``col_blocks[n]``; the dense
    Gram ``phi @ phi.T`` is then block-diagonal and this returns its diagonal
    blocks, stacked as an (n_blocks, block_size, block_size) array, in one
    pass over the columns.
    """
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    col_blocks = np.ascontiguousarray(col_blocks, dtype=np.int64)
    if phi.shape[0] != n_blocks * block_size:
        raise ValueError(
            f"phi has {phi.shape[0]} rows, expected {n_blocks} x {block_size}"
        )
    if USE_NUMBA:
        return _block_grams_nb(phi, col_blocks, n_blocks, block_size)
    return _block_grams_np(phi, col_blocks, n_blocks, block_size)


# ---------------------------------------------------------------------------
# rectangle-corner scatter for weight-map rendering
# ---------------------------------------------------------------------------


@njit(cache=True)
def _scatter_corners_nb(x0, x1, y0, y1, alpha, acc):
    for i in range(x0.size):
        a = alpha[i]
        acc[y0[i], x0[i]] += a
        acc[y0[i], x1[i]] -= a
        acc[y1[i], x0[i]] -= a
        acc[y1[i], x1[i]] += a


def _scatter_corners_np(x0, x1, y0, y1, alpha, acc):
    np.add.at(acc, (y0, x0), alpha)
    np.add.at(acc, (y0, x1), -alpha)
    np.add.at(acc, (y1, x0), -alpha)
    np.add.at(acc, (y1, x1), alpha)


def scatter_corners(
    x0: np.ndarray,
    x1: np.ndarray,
    y0: np.ndarray,
    y1: np.ndarray,
    alpha: np.ndarray,
    acc: np.ndarray,
) -> None:
    """Accumulate signed rectangle corners into ``acc`` (summed-area staging).

    A double cumulative sum of ``acc`` afterwards yields, at each pixel, the
    sum of ``alpha`` over rectangles [x0,x1) x [y0,y1) covering it.
    """
    x0 = np.ascontiguousarray(x0, dtype=np.int64)
    x1 = np.ascontiguousarray(x1, dtype=np.int64)
    y0 = np.ascontiguousarray(y0, dtype=np.int64)
    y1 = np.ascontiguousarray(y1, dtype=np.int64)
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    if USE_NUMBA:
        _scatter_corners_nb(x0, x1, y0, y1, alpha, acc)
    else:
        _scatter_corners_np(x0, x1, y0, y1, alpha, acc)


def warmup() -> None:
    """Trigger JIT compilation of all numba kernels (no-op on the numpy path)."""
    if not USE_NUMBA:
        return
    x = np.zeros((2, 3))
    _pairwise_sq_dists_nb(x, x)
    _nearest_centroids_nb(x, x)
    _block_grams_nb(np.zeros((4, 2)), np.zeros(2, dtype=np.int64), 2, 2)
    _scatter_corners_nb(
        np.zeros(1, dtype=np.int64),
        np.ones(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.ones(1, dtype=np.int64),
        np.ones(1),
        np.zeros((2, 2)),
    )

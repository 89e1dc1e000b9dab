"""Aggregation operators over encoding matrices.

Besides sum and max pooling, this module provides the equalized pooling that
solves for a vector whose dot-product with every patch encoding is 1:

* primal route: ridge solve (Phi Phi^T + lambda I)^-1 Phi 1 for lambda > 0,
  or the minimum-norm least-squares solution of Phi^T v = 1 for lambda = 0;
* dual route: per-patch weights alpha = (K + lambda I)^-1 1 from the
  patch-to-patch kernel K = Phi^T Phi, pooled as Phi alpha.

Block-sparse encodings make Phi Phi^T block-diagonal, enabling the
block-by-block fast path. Power and l2 normalization post-process pooled
vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .encoders import EncodingMatrix
from .linalg import (
    BlockDiagonal,
    NotPositiveDefiniteError,
    SolveReport,
    conjugate_gradient,
    min_norm_least_squares,
    solve_block_diagonal,
    solve_spd,
)

__all__ = [
    "PooledVector",
    "PatchWeights",
    "GmpConfig",
    "LAMBDA_GRID",
    "POWER_GRID",
    "sum_pool",
    "max_pool",
    "gmp_primal",
    "gmp_primal_block",
    "gmp_dual_weights",
    "weighted_pool",
    "power_normalize",
    "l2_normalize",
]

# Regularizer grid for cross-validation utilities.
LAMBDA_GRID = (1e1, 1e2, 1e3, 1e4, 1e5)
# Power-normalization exponents tried by the benchmark baseline.
POWER_GRID = (1.0, 0.7, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0)

# Dense systems above this dimension go through conjugate gradient when the
# solver is on auto.
_AUTO_CG_DIM = 4096


@dataclass(frozen=True)
class PooledVector:
    """A pooled D-dimensional representation and its normalization state.

    ``degenerate`` marks an all-zero vector that went through l2
    normalization unchanged.
    """

    values: np.ndarray
    normalization: str = "raw"  # "raw" | "l2"
    provenance: str = "sum"  # "sum" | "max" | "gmp_primal" | "gmp_dual" | "weighted"
    degenerate: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", values)
        if self.normalization not in ("raw", "l2"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.provenance not in ("sum", "max", "gmp_primal", "gmp_dual", "weighted"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.normalization == "l2" and not self.degenerate:
            norm = np.linalg.norm(values)
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"l2-normalized vector has norm {norm}")


@dataclass(frozen=True)
class PatchWeights:
    """Per-patch weights alpha with the regularizer they were solved under."""

    alpha: np.ndarray
    lam: float
    source: str = "custom"  # "custom" | "gmp_dual"

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64).ravel()
        object.__setattr__(self, "alpha", alpha)
        if not np.all(np.isfinite(alpha)):
            raise ValueError("patch weights must be finite")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def n(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class GmpConfig:
    """Solver configuration for the equalized pooling.

    ``solver="auto"`` picks the block path when block structure is present,
    conjugate gradient for large dense systems, and the direct dense solve
    otherwise. ``lam=0`` always takes the SVD minimum-norm route.
    """

    lam: float = 0.0
    solver: str = "auto"  # "auto" | "dense_direct" | "block" | "cg"
    cg_tol: float = 1e-10
    cg_max_iter: int | None = None
    rank_tol: float = 1e-10

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.solver not in ("auto", "dense_direct", "block", "cg"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.cg_tol <= 0 or self.rank_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.cg_max_iter is not None and self.cg_max_iter < 1:
            raise ValueError("cg_max_iter must be at least 1")


def _as_encoding(enc) -> EncodingMatrix:
    if isinstance(enc, EncodingMatrix):
        return enc
    return EncodingMatrix(np.asarray(enc, dtype=np.float64))


def sum_pool(enc: EncodingMatrix | np.ndarray) -> PooledVector:
    """Row sums of the encoding matrix (sum of per-patch encodings)."""
    enc = _as_encoding(enc)
    return PooledVector(enc.phi.sum(axis=1), provenance="sum")


def max_pool(enc: EncodingMatrix | np.ndarray) -> PooledVector:
    """Per-dimension maximum over patch encodings."""
    enc = _as_encoding(enc)
    return PooledVector(enc.phi.max(axis=1), provenance="max")


def _solve_dense(phi: np.ndarray, lam: float, rhs: np.ndarray) -> np.ndarray:
    gram = phi @ phi.T
    gram[np.diag_indices_from(gram)] += lam
    return solve_spd(gram, rhs)


def gmp_primal(
    enc: EncodingMatrix | np.ndarray, cfg: GmpConfig = GmpConfig()
) -> tuple[PooledVector, SolveReport]:
    """Pooled vector equally similar to every patch encoding.

    Solves min ||Phi^T v - 1||^2 + lam ||v||^2. With lam = 0 this is the
    minimum-norm least-squares solution (SVD route); with lam > 0 it is the
    ridge solution (Phi Phi^T + lam I)^-1 Phi 1, computed by the solver the
    config selects. The report carries ||Phi^T v - 1|| for the SVD route and
    the ridge-system residual otherwise.
    """
    enc = _as_encoding(enc)
    phi = enc.phi
    n = enc.n
    ones = np.ones(n)

    if cfg.lam == 0.0:
        v = min_norm_least_squares(phi.T, ones, rank_tol=cfg.rank_tol)
        residual = float(np.linalg.norm(phi.T @ v - ones))
        report = SolveReport("svd", 0, residual)
        return PooledVector(v, provenance="gmp_primal"), report

    solver = cfg.solver
    if solver == "auto":
        if enc.block_size is not None:
            solver = "block"
        elif enc.d > _AUTO_CG_DIM:
            solver = "cg"
        else:
            solver = "dense_direct"

    rhs = phi.sum(axis=1)
    if solver == "block":
        pooled = gmp_primal_block(enc, cfg.lam)
        v = pooled.values
        residual = float(np.linalg.norm(phi @ (phi.T @ v) + cfg.lam * v - rhs))
        return pooled, SolveReport("block", 0, residual)
    if solver == "cg":
        apply = lambda w: phi @ (phi.T @ w) + cfg.lam * w
        v, report = conjugate_gradient(
            apply, rhs, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter
        )
        return PooledVector(v, provenance="gmp_primal"), report
    v = _solve_dense(phi, cfg.lam, rhs)
    residual = float(np.linalg.norm(phi @ (phi.T @ v) + cfg.lam * v - rhs))
    return PooledVector(v, provenance="gmp_primal"), SolveReport(
        "cholesky", 0, residual
    )


def gmp_primal_block(enc: EncodingMatrix | np.ndarray, lam: float) -> PooledVector:
    """Block-by-block ridge solve for block-sparse encodings.

    Assembles the per-block Gram matrices of Phi Phi^T (block-diagonal by the
    encoding's support structure), adds lam to each diagonal and solves the
    blocks independently. Matches the dense route to solver precision.
    """
    enc = _as_encoding(enc)
    if enc.block_size is None:
        raise ValueError("encoding has no block structure; use the dense solver")
    if lam <= 0:
        raise ValueError("block solver requires lambda > 0")
    bs = enc.block_size
    grams = kernels.block_grams(enc.phi, enc.column_blocks, enc.n_blocks, bs)
    eye = np.eye(bs)
    blocks = tuple(grams[b] + lam * eye for b in range(enc.n_blocks))
    rhs = enc.phi.sum(axis=1)
    v = solve_block_diagonal(BlockDiagonal(blocks), rhs)
    return PooledVector(v, provenance="gmp_primal")


def gmp_dual_weights(k: np.ndarray, lam: float) -> PatchWeights:
    """Per-patch weights alpha = (K + lam I)^-1 1 from a PSD patch kernel.

    With lam = 0 the kernel must be nonsingular; a singular (or numerically
    singular) K raises with advice to regularize.
    """
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel matrix must be square, got {k.shape}")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    n = k.shape[0]
    ones = np.ones(n)
    system = k.copy()
    system[np.diag_indices_from(system)] += lam
    try:
        alpha = solve_spd(system, ones)
    except NotPositiveDefiniteError as err:
        if lam == 0.0:
            raise np.linalg.LinAlgError(
                "kernel matrix is singular at lambda=0 (duplicate or linearly "
                "dependent patches); pass lambda > 0 to regularize"
            ) from err
        raise
    if lam == 0.0:
        residual = np.linalg.norm(k @ alpha - ones)
        if residual > 1e-8 * np.linalg.norm(ones):
            raise np.linalg.LinAlgError(
                f"kernel matrix is numerically singular at lambda=0 "
                f"(residual {residual:.3e}); pass lambda > 0 to regularize"
            )
    return PatchWeights(alpha, lam=lam, source="gmp_dual")


def weighted_pool(
    enc: EncodingMatrix | np.ndarray, weights: PatchWeights
) -> PooledVector:
    """Linear combination of patch encodings, Phi @ alpha."""
    enc = _as_encoding(enc)
    if weights.n != enc.n:
        raise ValueError(
            f"weight count {weights.n} != number of encodings {enc.n}"
        )
    provenance = "gmp_dual" if weights.source == "gmp_dual" else "weighted"
    return PooledVector(enc.phi @ weights.alpha, provenance=provenance)


def power_normalize(v: PooledVector, rho: float) -> PooledVector:
    """Entrywise signed power: z -> sign(z) |z|^rho.

    rho = 1 is the identity; rho = 0 maps nonzero entries to their sign and
    preserves zeros. Resets the normalization state to raw.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    vals = v.values
    if rho == 0.0:
        out = np.sign(vals)
    else:
        out = np.sign(vals) * np.abs(vals) ** rho
    return PooledVector(out, normalization="raw", provenance=v.provenance)


def l2_normalize(v: PooledVector) -> PooledVector:
    """Scale to unit Euclidean norm; an all-zero vector is returned unchanged
    but flagged degenerate rather than raising (batch jobs must not abort)."""
    norm = float(np.linalg.norm(v.values))
    if norm == 0.0:
        return replace(v, normalization="l2", degenerate=True)
    return PooledVector(
        v.values / norm, normalization="l2", provenance=v.provenance
    )

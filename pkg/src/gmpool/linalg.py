"""Dense and block-diagonal linear algebra used by the pooling solvers.

Four solve routes: SVD-based minimum-norm least squares, direct SPD solve via
Cholesky, conjugate gradient on a matrix-free operator, and a block-diagonal
solve that factors each diagonal block independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "SolveReport",
    "BlockDiagonal",
    "NotPositiveDefiniteError",
    "min_norm_least_squares",
    "solve_spd",
    "conjugate_gradient",
    "solve_block_diagonal",
]

# Relative asymmetry above which a matrix is rejected instead of symmetrized.
_SYMMETRY_RTOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization failed; ``pivot`` is the 1-based failing minor."""

    def __init__(self, message: str, pivot: int, block: int | None = None):
        super().__init__(message)
        self.pivot = pivot
        self.block = block


@dataclass(frozen=True)
class SolveReport:
    """How a linear system was solved: method, work done, and final residual."""

    method: str  # "svd" | "cholesky" | "cg" | "block"
    iterations: int
    residual_norm: float
    converged: bool = True

    def __post_init__(self):
        if self.residual_norm < 0:
            raise ValueError("residual_norm must be non-negative")


@dataclass(frozen=True)
class BlockDiagonal:
    """A block-diagonal matrix stored as its ordered list of square blocks."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("BlockDiagonal needs at least one block")
        for i, blk in enumerate(self.blocks):
            blk = np.asarray(blk)
            if blk.ndim != 2 or blk.shape[0] != blk.shape[1]:
                raise ValueError(f"block {i} is not square: shape {blk.shape}")

    @property
    def offsets(self) -> tuple[int, ...]:
        """Starting row/column index of each block in the assembled matrix."""
        offs = []
        pos = 0
        for blk in self.blocks:
            offs.append(pos)
            pos += blk.shape[0]
        return tuple(offs)

    @property
    def dim(self) -> int:
        return sum(blk.shape[0] for blk in self.blocks)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for off, blk in zip(self.offsets, self.blocks):
            n = blk.shape[0]
            out[off : off + n, off : off + n] = blk
        return out


def _check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def min_norm_least_squares(
    a: np.ndarray, b: np.ndarray, rank_tol: float = 1e-10
) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a @ x = b`` via SVD.

    Among all x minimizing ||a x - b||^2, returns the one of smallest
    Euclidean norm. Singular values at or below ``rank_tol`` times the largest
    singular value are treated as zero.
    """
    a = _check_finite(a, "matrix")
    b = _check_finite(b, "rhs")
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if b.ndim != 1 or b.size != a.shape[0]:
        raise ValueError(f"rhs length {b.size} != matrix rows {a.shape[0]}")
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")

    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = rank_tol * s[0] if s.size else 0.0
    keep = s > cutoff
    if not np.any(keep):
        return np.zeros(a.shape[1])
    coeffs = (u[:, keep].T @ b) / s[keep]
    return vt[keep].T @ coeffs


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive-definite ``a`` via Cholesky.

    Numerical asymmetry up to 1e-12 (relative, Frobenius) is symmetrized away;
    larger asymmetry raises. Non-positive-definite input raises
    :class:`NotPositiveDefiniteError` naming the failing pivot.
    """
    a = _check_finite(a, "matrix")
    b = _check_finite(b, "rhs")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if b.ndim != 1 or b.size != a.shape[0]:
        raise ValueError(f"rhs length {b.size} != matrix dim {a.shape[0]}")

    a_norm = np.linalg.norm(a)
    asym = np.linalg.norm(a - a.T)
    if a_norm > 0 and asym > _SYMMETRY_RTOL * a_norm:
        raise ValueError(
            f"matrix is not symmetric (relative asymmetry {asym / a_norm:.3e})"
        )
    a = (a + a.T) / 2.0

    chol, info = lapack.dpotrf(a, lower=1)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: pivot {info} "
            f"(leading minor of order {info} is not positive)",
            pivot=int(info),
        )
    if info < 0:  # pragma: no cover - invalid argument, unreachable after checks
        raise np.linalg.LinAlgError(f"dpotrf: illegal argument {-info}")

    x, _ = lapack.dpotrs(chol, b, lower=1)
    # One refinement pass keeps the relative residual at the contract level
    # even for ill-conditioned systems.
    b_norm = np.linalg.norm(b)
    r = b - a @ x
    if b_norm > 0 and np.linalg.norm(r) > 1e-13 * b_norm:
        dx, _ = lapack.dpotrs(chol, r, lower=1)
        x = x + dx
    return x


def conjugate_gradient(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradient for SPD operators, from a zero initial iterate.

    Stops when ||apply(x) - b|| <= tol * ||b||. On non-convergence the best
    iterate seen is returned with ``converged=False`` in the report; this
    function never raises for lack of convergence.
    """
    b = _check_finite(b, "rhs")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = b.size
    if max_iter is None:
        max_iter = n

    b_norm = np.linalg.norm(b)
    x = np.zeros(n)
    if b_norm == 0.0:
        return x, SolveReport("cg", 0, 0.0, converged=True)
    stop = tol * b_norm

    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    best_x = x.copy()
    best_norm = math.sqrt(rs)
    iterations = 0

    for _ in range(max_iter):
        ap = apply(p)
        denom = float(p @ ap)
        if denom <= 0.0:
            break  # operator not SPD on this subspace; keep best iterate
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        iterations += 1
        rs_new = float(r @ r)
        r_norm = math.sqrt(rs_new)
        if r_norm < best_norm:
            best_norm = r_norm
            best_x = x.copy()
        if r_norm <= stop:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new

    true_res = float(np.linalg.norm(apply(best_x) - b))
    return best_x, SolveReport(
        "cg", iterations, true_res, converged=bool(true_res <= stop * (1 + 1e-12))
    )


def solve_block_diagonal(bd: BlockDiagonal, b: np.ndarray) -> np.ndarray:
    """Solve a block-diagonal SPD system block by block.

    Equivalent to ``solve_spd`` on the dense assembly; per-block factorization
    failures are re-raised with the offending block index attached.
    """
    b = _check_finite(b, "rhs")
    if b.size != bd.dim:
        raise ValueError(f"rhs length {b.size} != block-diagonal dim {bd.dim}")
    out = np.empty(bd.dim)
    for i, (off, blk) in enumerate(zip(bd.offsets, bd.blocks)):
        n = blk.shape[0]
        try:
            out[off : off + n] = solve_spd(blk, b[off : off + n])
        except NotPositiveDefiniteError as err:
            raise NotPositiveDefiniteError(
                f"block {i}: {err}", pivot=err.pivot, block=i
            ) from err
    return out

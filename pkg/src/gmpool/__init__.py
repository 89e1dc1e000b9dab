"""Generalized max pooling of local-descriptor encodings.

Aggregates a set of per-patch encodings into one fixed-length vector whose
dot-product with every patch encoding is equalized, via a primal ridge /
pseudo-inverse solve or dual per-patch weights, alongside the classic sum and
max poolings and the density-equalization view of match kernels.
"""

__version__ = "0.1.0"

from .density import (
    Kde,
    QuadratureError,
    equalization_weights,
    flatness_profile,
    gmk,
    kde_eval,
    kde_eval_grid,
    ppk,
)
from .encoders import (
    Codebook,
    DescriptorSet,
    EmkParams,
    EncodingMatrix,
    GmmModel,
    encode_bov_hard,
    encode_emk,
    encode_fv_hard,
    encode_vlad,
    gaussian_kernel,
    histogram,
)
from .linalg import (
    BlockDiagonal,
    NotPositiveDefiniteError,
    SolveReport,
    conjugate_gradient,
    min_norm_least_squares,
    solve_block_diagonal,
    solve_spd,
)
from .pooling import (
    LAMBDA_GRID,
    POWER_GRID,
    GmpConfig,
    PatchWeights,
    PooledVector,
    gmp_dual_weights,
    gmp_primal,
    gmp_primal_block,
    l2_normalize,
    max_pool,
    power_normalize,
    sum_pool,
    weighted_pool,
)
from .weightmap import WeightMap, normalize_map, render_weight_map

__all__ = [
    "__version__",
    "BlockDiagonal",
    "Codebook",
    "DescriptorSet",
    "EmkParams",
    "EncodingMatrix",
    "GmmModel",
    "GmpConfig",
    "Kde",
    "LAMBDA_GRID",
    "NotPositiveDefiniteError",
    "POWER_GRID",
    "PatchWeights",
    "PooledVector",
    "QuadratureError",
    "SolveReport",
    "WeightMap",
    "conjugate_gradient",
    "encode_bov_hard",
    "encode_emk",
    "encode_fv_hard",
    "encode_vlad",
    "equalization_weights",
    "flatness_profile",
    "gaussian_kernel",
    "gmk",
    "gmp_dual_weights",
    "gmp_primal",
    "gmp_primal_block",
    "histogram",
    "kde_eval",
    "kde_eval_grid",
    "l2_normalize",
    "max_pool",
    "min_norm_least_squares",
    "normalize_map",
    "power_normalize",
    "ppk",
    "render_weight_map",
    "solve_block_diagonal",
    "solve_spd",
    "sum_pool",
    "weighted_pool",
]

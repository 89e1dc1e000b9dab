"""Cross-module consistency suite behind the ``verify`` CLI verb.

Eight checks exercise the identities the library is built on: exact
equivalence with max pooling on hard assignments, the orthonormal-codebook
presence/absence form, primal/dual agreement, block and conjugate-gradient
solver equivalence, the large-regularizer sum-pooling limit, flatness of
equalization weights, and proportionality between the product-kernel integral
and the averaged match kernel.

Setting the environment variable ``GMP_VERIFY_FAULT=lambda`` perturbs the
regularizer handed to the dual route, which must surface as a named failure;
it exists only to prove the suite can fail.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .density import Kde, equalization_weights, flatness_profile, gmk, ppk
from .encoders import (
    Codebook,
    DescriptorSet,
    EncodingMatrix,
    GmmModel,
    encode_bov_hard,
    encode_fv_hard,
    encode_vlad,
)
from .pooling import GmpConfig, gmp_dual_weights, gmp_primal, gmp_primal_block, max_pool, sum_pool, weighted_pool

__all__ = ["CheckResult", "run_all_checks", "format_report", "CHECK_NAMES"]

_FAULT_ENV = "GMP_VERIFY_FAULT"

CHECK_NAMES = (
    "bov_gmp_equals_max_pool",
    "orthonormal_codebook_presence",
    "primal_dual_agreement",
    "block_equals_dense",
    "cg_equals_direct",
    "sum_pooling_limit",
    "kde_flatness",
    "ppk_gmk_proportionality",
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    tolerance: float
    observed: float
    passed: bool


def _result(name: str, tolerance: float, observed: float) -> CheckResult:
    return CheckResult(name, tolerance, float(observed), bool(observed <= tolerance))


def _fault_lambda(lam: float) -> float:
    if os.environ.get(_FAULT_ENV, "") == "lambda":
        return lam * 1.01
    return lam


def _rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / denom)


def check_bov_gmp_equals_max_pool(pairs: int = 25) -> CheckResult:
    worst = 0.0
    for seed in range(pairs):
        rng = np.random.default_rng(1000 + seed)
        c = int(rng.integers(2, 9))
        d = int(rng.integers(2, 6))
        n = int(rng.integers(1, 40))
        cb = Codebook(rng.normal(size=(c, d)))
        x = DescriptorSet(rng.normal(size=(n, d)))
        enc = encode_bov_hard(x, cb)
        pooled, _ = gmp_primal(enc, GmpConfig(lam=0.0))
        worst = max(worst, float(np.max(np.abs(pooled.values - max_pool(enc).values))))
    return _result("bov_gmp_equals_max_pool", 1e-10, worst)


def check_orthonormal_codebook(trials: int = 10) -> CheckResult:
    worst = 0.0
    for seed in range(trials):
        rng = np.random.default_rng(2000 + seed)
        d = int(rng.integers(4, 33))
        c = int(rng.integers(2, d + 1))
        q, _ = np.linalg.qr(rng.normal(size=(d, c)))
        present = rng.integers(0, 2, size=c).astype(bool)
        if not present.any():
            present[0] = True
        counts = np.where(present, rng.integers(1, 6, size=c), 0)
        cols = np.repeat(np.arange(c), counts)
        enc = EncodingMatrix(q[:, cols])
        pooled, _ = gmp_primal(enc, GmpConfig(lam=0.0))
        expected = q[:, present].sum(axis=1)
        worst = max(worst, float(np.max(np.abs(pooled.values - expected))))
        # duplicating any column must not change the result
        dup = EncodingMatrix(np.hstack([enc.phi, enc.phi[:, :1]]))
        pooled_dup, _ = gmp_primal(dup, GmpConfig(lam=0.0))
        worst = max(worst, float(np.max(np.abs(pooled_dup.values - pooled.values))))
    return _result("orthonormal_codebook_presence", 1e-9, worst)


def check_primal_dual(trials: int = 10) -> CheckResult:
    worst = 0.0
    for seed in range(trials):
        rng = np.random.default_rng(3000 + seed)
        d = int(rng.integers(5, 60))
        n = int(rng.integers(5, 60))
        phi = rng.normal(size=(d, n))
        enc = EncodingMatrix(phi)
        for lam in (1e1, 1e3, 1e5):
            primal, _ = gmp_primal(enc, GmpConfig(lam=lam, solver="dense_direct"))
            alpha = gmp_dual_weights(phi.T @ phi, _fault_lambda(lam))
            dual = weighted_pool(enc, alpha)
            worst = max(worst, _rel_diff(dual.values, primal.values))
    return _result("primal_dual_agreement", 1e-8, worst)


def check_block_equals_dense(trials: int = 6) -> CheckResult:
    worst = 0.0
    for seed in range(trials):
        rng = np.random.default_rng(4000 + seed)
        c = int(rng.choice([2, 4, 8]))
        d = int(rng.integers(2, 5))
        n = int(rng.integers(5, 40))
        x = DescriptorSet(rng.normal(size=(n, d)))
        cb = Codebook(rng.normal(size=(c, d)))
        gmm = GmmModel(
            rng.normal(size=(c, d)),
            rng.uniform(0.5, 2.0, size=(c, d)),
            np.full(c, 1.0 / c),
        )
        for enc in (encode_vlad(x, cb), encode_fv_hard(x, gmm)):
            lam = 10.0
            blocked = gmp_primal_block(enc, lam)
            dense, _ = gmp_primal(enc, GmpConfig(lam=lam, solver="dense_direct"))
            worst = max(worst, _rel_diff(blocked.values, dense.values))
    return _result("block_equals_dense", 1e-10, worst)


def check_cg_equals_direct(trials: int = 8) -> CheckResult:
    worst = 0.0
    for seed in range(trials):
        rng = np.random.default_rng(5000 + seed)
        d = int(rng.integers(10, 129))
        n = int(rng.integers(10, 129))
        enc = EncodingMatrix(rng.normal(size=(d, n)))
        lam = 10.0
        direct, _ = gmp_primal(enc, GmpConfig(lam=lam, solver="dense_direct"))
        cg, _ = gmp_primal(enc, GmpConfig(lam=lam, solver="cg", cg_tol=1e-10))
        worst = max(worst, _rel_diff(cg.values, direct.values))
    return _result("cg_equals_direct", 1e-6, worst)


def check_sum_pooling_limit(trials: int = 8) -> CheckResult:
    worst = 0.0
    for seed in range(trials):
        rng = np.random.default_rng(6000 + seed)
        d = int(rng.integers(5, 40))
        n = int(rng.integers(5, 40))
        phi = rng.normal(size=(d, n))
        enc = EncodingMatrix(phi)
        sigma_max = float(np.linalg.svd(phi, compute_uv=False)[0] ** 2)
        lam = 1e12 * sigma_max
        pooled, _ = gmp_primal(enc, GmpConfig(lam=lam, solver="dense_direct"))
        s = sum_pool(enc).values
        worst = max(worst, float(np.linalg.norm(lam * pooled.values - s) / np.linalg.norm(s)))
    return _result("sum_pooling_limit", 1e-3, worst)


def check_kde_flatness() -> CheckResult:
    samples = np.array([-11.0, -10.0, 7.0, 8.0, 9.0])
    x = DescriptorSet(samples[:, None])
    w = equalization_weights(x, sigma=3.0, lam=0.0)
    profile = flatness_profile(x, w, sigma=3.0, grid=samples)
    return _result("kde_flatness", 1e-8, float(np.max(np.abs(profile - 1.0))))


def check_ppk_gmk_proportionality(pairs: int = 5) -> CheckResult:
    sigma = 1.5
    ratios = []
    for seed in range(pairs):
        rng = np.random.default_rng(7000 + seed)
        xs = rng.uniform(-3, 3, size=int(rng.integers(3, 8)))
        ys = rng.uniform(-3, 3, size=int(rng.integers(3, 8)))
        p = Kde(xs, bandwidth=sigma / np.sqrt(2.0))
        q = Kde(ys, bandwidth=sigma / np.sqrt(2.0))
        value = ppk(p, q, rho=1.0)
        match = gmk(DescriptorSet(xs[:, None]), DescriptorSet(ys[:, None]), sigma)
        ratios.append(value / match)
    ratios = np.asarray(ratios)
    spread = float((ratios.max() - ratios.min()) / abs(ratios.mean()))
    return _result("ppk_gmk_proportionality", 1e-4, spread)


def run_all_checks() -> list[CheckResult]:
    # All systems here are small; keep BLAS single-threaded to avoid
    # oversubscription overhead in the loops.
    with threadpool_limits(limits=1):
        return [
            check_bov_gmp_equals_max_pool(),
            check_orthonormal_codebook(),
            check_primal_dual(),
            check_block_equals_dense(),
            check_cg_equals_direct(),
            check_sum_pooling_limit(),
            check_kde_flatness(),
            check_ppk_gmk_proportionality(),
        ]


def format_report(results: list[CheckResult]) -> str:
    lines = ["check,tolerance,observed,status"]
    lines.extend(
        f"{r.name},{r.tolerance:g},{r.observed:.6e},{'pass' if r.passed else 'FAIL'}"
        for r in results
    )
    return "\n".join(lines) + "\n"

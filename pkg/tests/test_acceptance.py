"""Acceptance suite: one test per release criterion, at the stated
tolerances, printing a PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import math
import time

import numpy as np

from gmpool.cli import main as cli_main
from gmpool.density import Kde, gmk, ppk
from gmpool.encoders import (
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
)
from gmpool.fileio import SyntheticSpec
from gmpool.pooling import (
    GmpConfig,
    PatchWeights,
    gmp_dual_weights,
    gmp_primal,
    gmp_primal_block,
    max_pool,
    sum_pool,
    weighted_pool,
)
from gmpool.synthetic import run_benchmark
from gmpool.weightmap import render_weight_map


def report(number, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {number:02d} {name}: {status} {detail}".rstrip())
    assert passed, f"criterion {number} ({name}) failed: {detail}"


def test_01_bov_gmp_equals_max_pool():
    """100 seeded set/codebook pairs: the lam=0 solution reproduces max
    pooling on hard assignments to 1e-10 per entry, inside 5 seconds."""
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(2, 17))
        d = int(rng.integers(2, 9))
        n = int(rng.integers(1, 51))
        cb = Codebook(rng.normal(size=(c, d)))
        x = DescriptorSet(rng.normal(size=(n, d)))
        enc = encode_bov_hard(x, cb)
        pooled, _ = gmp_primal(enc, GmpConfig(lam=0.0))
        worst = max(worst, float(np.max(np.abs(pooled.values - max_pool(enc).values))))
    elapsed = time.perf_counter() - start
    report(
        1,
        "bov_gmp_equals_max_pool",
        worst <= 1e-10 and elapsed < 5.0,
        f"(worst {worst:.2e}, tol 1e-10, {elapsed:.2f}s < 5s)",
    )


def test_02_orthonormal_codebook_presence_sum():
    """Orthonormal codewords: the lam=0 solution is the sum of present
    codewords to 1e-9, invariant to duplicating columns, inside 5 seconds."""
    start = time.perf_counter()
    worst = 0.0
    for seed in range(40):
        rng = np.random.default_rng(200 + seed)
        d = int(rng.integers(4, 65))
        c = int(rng.integers(2, d + 1))
        q, _ = np.linalg.qr(rng.normal(size=(d, c)))
        counts = rng.integers(0, 6, size=c)
        if counts.sum() == 0:
            counts[rng.integers(0, c)] = 1
        cols = np.repeat(np.arange(c), counts)
        pooled, _ = gmp_primal(EncodingMatrix(q[:, cols]), GmpConfig(lam=0.0))
        expected = q[:, counts > 0].sum(axis=1)
        worst = max(worst, float(np.max(np.abs(pooled.values - expected))))

        dup_cols = np.concatenate([cols, cols[:1]])
        dup, _ = gmp_primal(EncodingMatrix(q[:, dup_cols]), GmpConfig(lam=0.0))
        worst = max(worst, float(np.max(np.abs(dup.values - pooled.values))))
    elapsed = time.perf_counter() - start
    report(
        2,
        "orthonormal_codebook_presence_sum",
        worst <= 1e-9 and elapsed < 5.0,
        f"(worst {worst:.2e}, tol 1e-9, {elapsed:.2f}s < 5s)",
    )


def test_03_primal_dual_agreement():
    """50 seeded encoding matrices, three regularizer decades: the dual
    weight route matches the primal ridge route to 1e-8 relative."""
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(300 + seed)
        d = int(rng.integers(2, 101))
        n = int(rng.integers(2, 101))
        phi = rng.normal(size=(d, n))
        for lam in (1e1, 1e3, 1e5):
            primal, _ = gmp_primal(phi, GmpConfig(lam=lam, solver="dense_direct"))
            dual = weighted_pool(phi, gmp_dual_weights(phi.T @ phi, lam))
            rel = np.linalg.norm(dual.values - primal.values) / np.linalg.norm(
                primal.values
            )
            worst = max(worst, float(rel))
    report(3, "primal_dual_agreement", worst <= 1e-8, f"(worst {worst:.2e}, tol 1e-8)")


def test_04_block_equals_dense():
    """Residual and hard-Fisher encodings with 2/4/8 blocks: the block
    solver matches the dense route to 1e-10 relative."""
    worst = 0.0
    trial = 0
    for size in (2, 4, 8):
        for rep in range(3):
            rng = np.random.default_rng(400 + trial)
            trial += 1
            d = int(rng.integers(2, 6))
            n = int(rng.integers(5, 60))
            x = DescriptorSet(rng.normal(size=(n, d)))
            cb = Codebook(rng.normal(size=(size, d)))
            gmm = GmmModel(
                rng.normal(size=(size, d)),
                rng.uniform(0.5, 2.0, size=(size, d)),
                np.full(size, 1.0 / size),
            )
            for enc in (encode_vlad(x, cb), encode_fv_hard(x, gmm)):
                blocked = gmp_primal_block(enc, 10.0)
                dense, _ = gmp_primal(enc, GmpConfig(lam=10.0, solver="dense_direct"))
                rel = np.linalg.norm(
                    blocked.values - dense.values
                ) / np.linalg.norm(dense.values)
                worst = max(worst, float(rel))
    report(4, "block_equals_dense", worst <= 1e-10, f"(worst {worst:.2e}, tol 1e-10)")


def test_05_cg_equals_direct():
    """20 seeded instances up to dimension 512: conjugate gradient matches
    the direct dense solve to 1e-6 relative."""
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(500 + seed)
        d = int(rng.integers(16, 513))
        n = int(rng.integers(16, 129))
        enc = EncodingMatrix(rng.normal(size=(d, n)))
        direct, _ = gmp_primal(enc, GmpConfig(lam=10.0, solver="dense_direct"))
        cg, _ = gmp_primal(enc, GmpConfig(lam=10.0, solver="cg", cg_tol=1e-10))
        rel = np.linalg.norm(cg.values - direct.values) / np.linalg.norm(direct.values)
        worst = max(worst, float(rel))
    report(5, "cg_equals_direct", worst <= 1e-6, f"(worst {worst:.2e}, tol 1e-6)")


def test_06_sum_pooling_limit():
    """At lam = 1e12 times the Gram spectral radius, lam * solution
    approaches the plain sum to 1e-3 relative, on 20 instances."""
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(600 + seed)
        d = int(rng.integers(3, 60))
        n = int(rng.integers(3, 60))
        phi = rng.normal(size=(d, n))
        sigma_max = float(np.linalg.svd(phi, compute_uv=False)[0] ** 2)
        lam = 1e12 * sigma_max
        pooled, _ = gmp_primal(phi, GmpConfig(lam=lam, solver="dense_direct"))
        s = sum_pool(phi).values
        rel = np.linalg.norm(lam * pooled.values - s) / np.linalg.norm(s)
        worst = max(worst, float(rel))
    report(6, "sum_pooling_limit", worst <= 1e-3, f"(worst {worst:.2e}, tol 1e-3)")


def test_07_kde_flatness_figure(tmp_path):
    """The demo's equalized curve is 1.0 at all five sample abscissae to
    1e-8 and the plain density has exactly two local maxima."""
    out = tmp_path / "kde.csv"
    assert cli_main(["kde-demo", "--output", str(out)]) == 0
    data = np.array(
        [
            [float(v) for v in line.split(",")]
            for line in out.read_text().splitlines()[1:]
        ]
    )
    x, kde, _, weighted = data.T
    worst = 0.0
    for s in (-11.0, -10.0, 7.0, 8.0, 9.0):
        i = int(np.argmin(np.abs(x - s)))
        worst = max(worst, abs(weighted[i] - 1.0))
    maxima = int(np.sum((kde[1:-1] > kde[:-2]) & (kde[1:-1] > kde[2:])))
    report(
        7,
        "kde_flatness_figure",
        worst <= 1e-8 and maxima == 2,
        f"(worst flatness dev {worst:.2e}, tol 1e-8; {maxima} maxima, expected 2)",
    )


def test_08_ppk_proportional_to_gmk():
    """Over 5 seeded 1-d set pairs, the rho=1 product integral divided by
    the averaged match kernel is constant to 1e-4 relative."""
    sigma = 2.0
    ratios = []
    for seed in range(5):
        rng = np.random.default_rng(800 + seed)
        xs = rng.uniform(-4.0, 4.0, size=int(rng.integers(3, 9)))
        ys = rng.uniform(-4.0, 4.0, size=int(rng.integers(3, 9)))
        p = Kde(xs, bandwidth=sigma / math.sqrt(2.0))
        q = Kde(ys, bandwidth=sigma / math.sqrt(2.0))
        value = ppk(p, q, rho=1.0)  # raises if quadrature is not converged
        match = gmk(DescriptorSet(xs[:, None]), DescriptorSet(ys[:, None]), sigma)
        ratios.append(value / match)
    spread = (max(ratios) - min(ratios)) / abs(float(np.mean(ratios)))
    report(
        8, "ppk_proportional_to_gmk", spread <= 1e-4, f"(spread {spread:.2e}, tol 1e-4)"
    )


def test_09_emk_kernel_fidelity():
    """At 4096 output dimensions the random-feature product tracks the
    exact kernel within 0.05 mean absolute error over 200 seeded pairs."""
    sigma = 1.0
    errs = []
    for seed in range(200):
        rng = np.random.default_rng(900 + seed)
        x = rng.normal(size=4)
        y = x + 0.6 * rng.normal(size=4)
        enc = encode_emk(
            DescriptorSet(np.vstack([x, y])), EmkParams(sigma=sigma, seed=seed), 4096
        )
        approx = float(enc.phi[:, 0] @ enc.phi[:, 1])
        errs.append(abs(approx - gaussian_kernel(x, y, sigma)))
    mean_err = float(np.mean(errs))
    report(9, "emk_kernel_fidelity", mean_err <= 0.05, f"(mean {mean_err:.4f}, tol 0.05)")


def test_10_synthetic_burstiness_benchmark():
    """Dominant shared background (95%): equalized pooling beats sum
    pooling on every one of 5 seeds, within a 2-minute budget."""
    start = time.perf_counter()
    gaps = []
    for seed in range(5):
        spec = SyntheticSpec(
            classes=4,
            images_per_class=12,
            descriptors_per_image=64,
            background_fraction=0.95,
            descriptor_dim=8,
            noise_scale=0.25,
            seed=seed,
            encoder={"type": "emk", "dim": 256, "sigma": 1.0},
        )
        rows = {r.method: r.accuracy for r in run_benchmark(spec)}
        gaps.append((seed, rows["sum"], rows["gmp"]))
    elapsed = time.perf_counter() - start
    all_better = all(gmp > s for _, s, gmp in gaps)
    detail = " ".join(f"seed{sd}:{s:.2f}->{g:.2f}" for sd, s, g in gaps)
    report(
        10,
        "synthetic_burstiness_benchmark",
        all_better and elapsed < 120.0,
        f"({detail}, {elapsed:.1f}s < 120s)",
    )


def test_11_weight_map_oracle():
    """20 random layouts with border-crossing rectangles: the prefix-sum
    rendering equals the per-pixel membership oracle exactly (integer
    weights keep float addition exact)."""

    def brute_force(geometry, alpha, height, width):
        out = np.zeros((height, width))
        for (gx, gy, gw, gh), a in zip(geometry, alpha):
            for r in range(height):
                for c in range(width):
                    if gx <= c < gx + gw and gy <= r < gy + gh:
                        out[r, c] += a
        return out

    exact = True
    for seed in range(20):
        rng = np.random.default_rng(1100 + seed)
        h = int(rng.integers(1, 16))
        w = int(rng.integers(1, 16))
        n = int(rng.integers(1, 20))
        geom = np.column_stack(
            [
                rng.integers(-5, w + 3, size=n).astype(float),
                rng.integers(-5, h + 3, size=n).astype(float),
                rng.integers(0, w + 6, size=n).astype(float),
                rng.integers(0, h + 6, size=n).astype(float),
            ]
        )
        alpha = rng.integers(-9, 10, size=n).astype(float)
        rendered = render_weight_map(geom, PatchWeights(alpha, 0.0), h, w)
        if not np.array_equal(rendered.values, brute_force(geom, alpha, h, w)):
            exact = False
            break
    report(11, "weight_map_oracle", exact, "(20 layouts, exact equality)")

"""Command-line front end.

Verbs:

* ``pool``      encode + pool a descriptor CSV into per-image vectors
* ``kde-demo``  emit the 1-d density-equalization figure data
* ``bench``     run the synthetic burstiness benchmark
* ``verify``    run the cross-module consistency suite

All outputs are deterministic functions of the input files and seeds. The
``GMP_POOL_JOBS`` environment variable overrides ``--jobs``.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .density import Kde, equalization_weights, flatness_profile, kde_eval_grid
from .encoders import (
    Codebook,
    DescriptorSet,
    EmkParams,
    GmmModel,
    encode_bov_hard,
    encode_emk,
    encode_fv_hard,
    encode_vlad,
)
from .fileio import (
    ConfigError,
    DescriptorFileError,
    PipelineConfig,
    load_pipeline_config,
    load_synthetic_spec,
    read_descriptor_sets,
    write_pooled_csv,
)
from .pooling import gmp_primal, l2_normalize, max_pool, power_normalize, sum_pool
from .synthetic import format_report as format_bench_report
from .synthetic import run_benchmark
from .verify import format_report as format_verify_report
from .verify import run_all_checks

KDE_DEMO_SAMPLES = (-11.0, -10.0, 7.0, 8.0, 9.0)
KDE_DEMO_SIGMA = 3.0
KDE_DEMO_GRID_POINTS = 1001


def _resolve_jobs(cli_jobs: int) -> int:
    env = os.environ.get("GMP_POOL_JOBS")
    if env is not None:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"GMP_POOL_JOBS must be an integer, got {env!r}") from None
    else:
        jobs = cli_jobs
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    return jobs


def _build_encoder(cfg: PipelineConfig):
    enc = cfg.encoder
    etype = enc["type"]
    if etype == "bov":
        cb = Codebook(np.asarray(enc["centroids"], dtype=np.float64))
        return lambda x: encode_bov_hard(x, cb)
    if etype == "vlad":
        cb = Codebook(np.asarray(enc["centroids"], dtype=np.float64))
        return lambda x: encode_vlad(x, cb)
    if etype == "fv_hard":
        gmm = GmmModel(
            np.asarray(enc["means"], dtype=np.float64),
            np.asarray(enc["variances"], dtype=np.float64),
            np.asarray(enc["weights"], dtype=np.float64),
        )
        return lambda x: encode_fv_hard(x, gmm)
    params = EmkParams(sigma=float(enc["sigma"]), seed=cfg.seed)
    out_dim = int(enc["dim"])
    return lambda x: encode_emk(x, params, out_dim)


def _pool_one(cfg: PipelineConfig, encode, image_id: str, dset: DescriptorSet):
    try:
        encoding = encode(dset)
    except ValueError as err:
        raise ConfigError(f"image {image_id!r}: {err}") from None
    ptype = cfg.pooling["type"]
    if ptype == "sum":
        pooled = sum_pool(encoding)
    elif ptype == "max":
        pooled = max_pool(encoding)
    else:
        pooled, _ = gmp_primal(encoding, cfg.gmp_config())
    for step in cfg.post:
        if step["type"] == "power":
            pooled = power_normalize(pooled, float(step["rho"]))
        else:
            pooled = l2_normalize(pooled)
    return pooled


def cmd_pool(args: argparse.Namespace) -> int:
    cfg = load_pipeline_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    images = read_descriptor_sets(args.descriptors)
    encode = _build_encoder(cfg)
    jobs = _resolve_jobs(args.jobs)

    if jobs == 1:
        pooled = [_pool_one(cfg, encode, iid, dset) for iid, dset in images]
    else:
        # Per-image work is independent; output order stays input order.
        # Worker threads each call into BLAS, so pin it to one thread.
        with threadpool_limits(limits=1), ThreadPoolExecutor(max_workers=jobs) as pool:
            pooled = list(
                pool.map(lambda item: _pool_one(cfg, encode, *item), images)
            )

    write_pooled_csv(
        args.output, zip((iid for iid, _ in images), pooled), cfg.describe()
    )
    return 0


def cmd_kde_demo(args: argparse.Namespace) -> int:
    """Write the uniform KDE, its renormalized 0.5-power, and the equalized
    weighted curve for the fixed five-sample 1-d configuration."""
    samples = np.asarray(KDE_DEMO_SAMPLES)
    sigma = KDE_DEMO_SIGMA
    pad = 5.0 * sigma
    grid = np.linspace(samples.min() - pad, samples.max() + pad, KDE_DEMO_GRID_POINTS)

    kde = Kde(samples, bandwidth=sigma / np.sqrt(2.0))
    uniform = kde_eval_grid(kde, grid)
    powered = uniform**0.5
    powered = powered / np.trapezoid(powered, grid)

    dset = DescriptorSet(samples[:, None])
    weights = equalization_weights(dset, sigma=sigma, lam=0.0)
    weighted = flatness_profile(dset, weights, sigma=sigma, grid=grid)

    lines = ["x,kde,kde_pow_renorm,weighted_kde"]
    lines.extend(
        f"{x:.12g},{u:.12g},{p:.12g},{w:.12g}"
        for x, u, p, w in zip(grid, uniform, powered, weighted)
    )
    Path(args.output).write_text("\n".join(lines) + "\n")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    spec = load_synthetic_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    rows = run_benchmark(spec)
    Path(args.output).write_text(format_bench_report(spec, rows))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_all_checks()
    report = format_verify_report(results)
    if args.output:
        Path(args.output).write_text(report)
    sys.stdout.write(report)
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(
            f"FAILED {r.name}: observed {r.observed:.6e} > tolerance {r.tolerance:g}",
            file=sys.stderr,
        )
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmpool",
        description="Pool local-descriptor encodings into fixed-length vectors.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_pool = sub.add_parser("pool", help="encode and pool a descriptor CSV")
    p_pool.add_argument("descriptors", help="descriptor CSV file")
    p_pool.add_argument("--config", required=True, help="pipeline config JSON")
    p_pool.add_argument("--output", required=True, help="output CSV path")
    p_pool.add_argument("--seed", type=int, default=None, help="override config seed")
    p_pool.add_argument(
        "--jobs", type=int, default=1,
        help="parallel image workers (GMP_POOL_JOBS overrides)",
    )
    p_pool.set_defaults(func=cmd_pool)

    p_kde = sub.add_parser("kde-demo", help="emit density-equalization figure data")
    p_kde.add_argument("--output", required=True, help="output CSV path")
    p_kde.set_defaults(func=cmd_kde_demo)

    p_bench = sub.add_parser("bench", help="run the synthetic burstiness benchmark")
    p_bench.add_argument("spec", help="benchmark spec JSON")
    p_bench.add_argument("--output", required=True, help="report CSV path")
    p_bench.add_argument("--seed", type=int, default=None, help="override spec seed")
    p_bench.set_defaults(func=cmd_bench)

    p_verify = sub.add_parser("verify", help="run the consistency suite")
    p_verify.add_argument("--output", default=None, help="report CSV path")
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DescriptorFileError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, np.linalg.LinAlgError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

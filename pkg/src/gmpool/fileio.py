"""File formats for the command-line front end.

Descriptor files are CSV, one image per block: a header row
``image_id,n_descriptors,dim`` followed by one descriptor per row (``dim``
values, optionally with ``x,y,w,h`` geometry appended). Pipeline and
benchmark configs are JSON with strict schemas: unknown keys are errors so
typos cannot silently change a run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .encoders import Codebook, DescriptorSet, GmmModel
from .pooling import GmpConfig, PooledVector

__all__ = [
    "ConfigError",
    "DescriptorFileError",
    "PipelineConfig",
    "SyntheticSpec",
    "read_descriptor_sets",
    "write_descriptor_sets",
    "load_pipeline_config",
    "parse_pipeline_config",
    "load_synthetic_spec",
    "parse_synthetic_spec",
    "write_pooled_csv",
]


class ConfigError(ValueError):
    """A config file failed schema validation."""


class DescriptorFileError(ValueError):
    """A descriptor CSV is malformed; the message names line and field."""


# ---------------------------------------------------------------------------
# descriptor CSV
# ---------------------------------------------------------------------------


def read_descriptor_sets(path: str | Path) -> list[tuple[str, DescriptorSet]]:
    """Parse a descriptor CSV into (image_id, DescriptorSet) pairs."""
    path = Path(path)
    lines = path.read_text().splitlines()
    out: list[tuple[str, DescriptorSet]] = []
    lineno = 0
    total = len(lines)

    def fail(msg: str) -> DescriptorFileError:
        return DescriptorFileError(f"{path}: line {lineno}: {msg}")

    while lineno < total:
        header = lines[lineno].strip()
        lineno += 1
        if not header:
            continue
        parts = header.split(",")
        if len(parts) != 3:
            raise fail(
                f"expected image header 'image_id,n_descriptors,dim', got {header!r}"
            )
        image_id = parts[0].strip()
        if not image_id:
            raise fail("empty image_id field")
        try:
            n_desc = int(parts[1])
            dim = int(parts[2])
        except ValueError:
            raise fail(f"n_descriptors/dim must be integers, got {header!r}") from None
        if n_desc < 1 or dim < 1:
            raise fail(f"n_descriptors and dim must be >= 1, got {header!r}")

        rows = []
        width = None
        for _ in range(n_desc):
            if lineno >= total:
                raise fail(f"image {image_id!r}: unexpected end of file")
            row = lines[lineno].strip()
            lineno += 1
            fields = row.split(",")
            if width is None:
                if len(fields) not in (dim, dim + 4):
                    raise fail(
                        f"image {image_id!r}: expected {dim} values "
                        f"(or {dim}+4 with geometry), got {len(fields)}"
                    )
                width = len(fields)
            elif len(fields) != width:
                raise fail(
                    f"image {image_id!r}: inconsistent row width "
                    f"({len(fields)} vs {width})"
                )
            try:
                rows.append([float(tok) for tok in fields])
            except ValueError as err:
                raise fail(f"image {image_id!r}: {err}") from None
        data = np.asarray(rows, dtype=np.float64)
        geometry = data[:, dim:] if width == dim + 4 else None
        out.append((image_id, DescriptorSet(data[:, :dim], geometry=geometry)))

    if not out:
        raise DescriptorFileError(f"{path}: no image blocks found")
    return out


def write_descriptor_sets(
    path: str | Path, images: Iterable[tuple[str, DescriptorSet]]
) -> None:
    lines = []
    for image_id, dset in images:
        lines.append(f"{image_id},{dset.n},{dset.dim}")
        rows = dset.descriptors
        if dset.geometry is not None:
            rows = np.hstack([rows, dset.geometry])
        lines.extend(",".join(f"{v:.12g}" for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# config schemas
# ---------------------------------------------------------------------------


def _require_keys(obj: dict, allowed: dict[str, bool], where: str) -> None:
    """allowed maps key -> required?"""
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = [k for k, required in allowed.items() if required and k not in obj]
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {missing}")


def _matrix(obj, where: str) -> np.ndarray:
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"{where}: expected a 2-d array of numbers")
    return arr


@dataclass(frozen=True)
class PipelineConfig:
    """Validated encode -> pool -> post pipeline."""

    encoder: dict
    pooling: dict
    post: tuple[dict, ...]
    seed: int

    def describe(self) -> str:
        enc = self.encoder["type"]
        pool = self.pooling["type"]
        if pool == "gmp":
            pool = f"gmp(lambda={self.pooling['lambda']:g})"
        steps = []
        for step in self.post:
            if step["type"] == "power":
                steps.append(f"power({step['rho']:g})")
            else:
                steps.append("l2")
        post = "|".join(steps) if steps else "none"
        return f"encoder={enc} pooling={pool} post={post} seed={self.seed}"

    def gmp_config(self) -> GmpConfig:
        p = self.pooling
        return GmpConfig(
            lam=p.get("lambda", 0.0),
            solver=p.get("solver", "auto"),
            cg_tol=p.get("cg_tol", 1e-10),
            cg_max_iter=p.get("cg_max_iter"),
            rank_tol=p.get("rank_tol", 1e-10),
        )


def parse_pipeline_config(obj: dict, where: str = "config") -> PipelineConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: top level must be an object")
    _require_keys(
        obj, {"encoder": True, "pooling": True, "post": False, "seed": False}, where
    )

    enc = obj["encoder"]
    if not isinstance(enc, dict) or "type" not in enc:
        raise ConfigError(f"{where}.encoder: must be an object with a 'type'")
    etype = enc["type"]
    if etype == "bov" or etype == "vlad":
        _require_keys(enc, {"type": True, "centroids": True}, f"{where}.encoder")
        Codebook(_matrix(enc["centroids"], f"{where}.encoder.centroids"))
    elif etype == "fv_hard":
        _require_keys(
            enc,
            {"type": True, "means": True, "variances": True, "weights": True},
            f"{where}.encoder",
        )
        GmmModel(
            _matrix(enc["means"], f"{where}.encoder.means"),
            _matrix(enc["variances"], f"{where}.encoder.variances"),
            np.asarray(enc["weights"], dtype=np.float64),
        )
    elif etype == "emk":
        _require_keys(enc, {"type": True, "dim": True, "sigma": True}, f"{where}.encoder")
        if int(enc["dim"]) % 2 != 0 or int(enc["dim"]) < 2:
            raise ConfigError(f"{where}.encoder.dim: must be even and >= 2")
        if float(enc["sigma"]) <= 0:
            raise ConfigError(f"{where}.encoder.sigma: must be positive")
    else:
        raise ConfigError(
            f"{where}.encoder.type: unknown encoder {etype!r} "
            "(expected bov, vlad, fv_hard or emk)"
        )

    pool = obj["pooling"]
    if not isinstance(pool, dict) or "type" not in pool:
        raise ConfigError(f"{where}.pooling: must be an object with a 'type'")
    ptype = pool["type"]
    if ptype in ("sum", "max"):
        _require_keys(pool, {"type": True}, f"{where}.pooling")
    elif ptype == "gmp":
        _require_keys(
            pool,
            {
                "type": True,
                "lambda": True,
                "solver": False,
                "cg_tol": False,
                "cg_max_iter": False,
                "rank_tol": False,
            },
            f"{where}.pooling",
        )
        if float(pool["lambda"]) < 0:
            raise ConfigError(f"{where}.pooling.lambda: must be >= 0")
    else:
        raise ConfigError(
            f"{where}.pooling.type: unknown pooling {ptype!r} "
            "(expected sum, max or gmp)"
        )

    post = obj.get("post", [])
    if not isinstance(post, list):
        raise ConfigError(f"{where}.post: must be a list of steps")
    for i, step in enumerate(post):
        if not isinstance(step, dict) or "type" not in step:
            raise ConfigError(f"{where}.post[{i}]: must be an object with a 'type'")
        if step["type"] == "power":
            _require_keys(step, {"type": True, "rho": True}, f"{where}.post[{i}]")
            rho = float(step["rho"])
            if not 0.0 <= rho <= 1.0:
                raise ConfigError(f"{where}.post[{i}].rho: must lie in [0, 1]")
        elif step["type"] == "l2":
            _require_keys(step, {"type": True}, f"{where}.post[{i}]")
        else:
            raise ConfigError(
                f"{where}.post[{i}].type: unknown step {step['type']!r} "
                "(expected power or l2)"
            )

    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"{where}.seed: must be an integer")

    return PipelineConfig(
        encoder=enc, pooling=pool, post=tuple(post), seed=seed
    )


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err}") from None
    return parse_pipeline_config(obj, where=str(path))


# ---------------------------------------------------------------------------
# synthetic benchmark spec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of the synthetic burstiness benchmark: every image shares a
    frequent background mode; a small class-specific fraction carries the
    label signal."""

    classes: int
    images_per_class: int
    descriptors_per_image: int
    background_fraction: float
    descriptor_dim: int
    noise_scale: float
    seed: int
    encoder: dict = field(
        default_factory=lambda: {"type": "emk", "dim": 256, "sigma": 1.0}
    )

    def __post_init__(self):
        for name in ("classes", "images_per_class", "descriptors_per_image",
                     "descriptor_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"synthetic spec: {name} must be >= 1")
        if self.images_per_class < 3:
            raise ConfigError(
                "synthetic spec: images_per_class must be >= 3 to form "
                "train/validation/test splits"
            )
        if not 0.0 < self.background_fraction < 1.0:
            raise ConfigError("synthetic spec: background_fraction must be in (0, 1)")
        if self.noise_scale <= 0:
            raise ConfigError("synthetic spec: noise_scale must be positive")


def parse_synthetic_spec(obj: dict, where: str = "spec") -> SyntheticSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: top level must be an object")
    _require_keys(
        obj,
        {
            "classes": True,
            "images_per_class": True,
            "descriptors_per_image": True,
            "background_fraction": True,
            "descriptor_dim": True,
            "noise_scale": True,
            "seed": True,
            "encoder": False,
        },
        where,
    )
    kwargs = dict(
        classes=int(obj["classes"]),
        images_per_class=int(obj["images_per_class"]),
        descriptors_per_image=int(obj["descriptors_per_image"]),
        background_fraction=float(obj["background_fraction"]),
        descriptor_dim=int(obj["descriptor_dim"]),
        noise_scale=float(obj["noise_scale"]),
        seed=int(obj["seed"]),
    )
    if "encoder" in obj:
        enc = obj["encoder"]
        if not isinstance(enc, dict) or enc.get("type") != "emk":
            raise ConfigError(f"{where}.encoder: only the emk encoder is supported")
        _require_keys(enc, {"type": True, "dim": True, "sigma": True}, f"{where}.encoder")
        kwargs["encoder"] = {
            "type": "emk", "dim": int(enc["dim"]), "sigma": float(enc["sigma"])
        }
    return SyntheticSpec(**kwargs)


def load_synthetic_spec(path: str | Path) -> SyntheticSpec:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err}") from None
    return parse_synthetic_spec(obj, where=str(path))


# ---------------------------------------------------------------------------
# pooled-vector output
# ---------------------------------------------------------------------------


def write_pooled_csv(
    path: str | Path,
    results: Iterable[tuple[str, PooledVector]],
    metadata: str,
) -> None:
    """One row per image: image_id followed by the pooled values. The first
    line echoes the pipeline composition as a ``#`` comment."""
    lines = [f"# pipeline: {metadata}"]
    for image_id, pooled in results:
        values = ",".join(f"{v:.12g}" for v in pooled.values)
        lines.append(f"{image_id},{values}")
    Path(path).write_text("\n".join(lines) + "\n")

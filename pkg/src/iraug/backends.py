"""Pluggable reconstruction backends.

A backend maps quantized images back toward realistic ones. Two run
in-process (identity, mask-gated box smoothing); the external kind is a
subprocess honoring a directory-batch protocol:

    <command> --input-dir <dir> --output-dir <dir> --manifest <file>

where the manifest is a TSV of `sample_id<TAB>image_filename<TAB>mask_filename`,
one entry per line, and the backend must write `<sample_id>.png` into the
output directory for every entry and exit 0. Responses are validated
atomically: a missing or misshapen output rejects the whole batch.
"""

from __future__ import annotations

import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import BackendError, ConfigError, ContractError
from .raster import load_gray_image, load_target_mask, save_gray_image
from .types import GrayImage, TargetMask, require_same_shape

PROTOCOL_MANIFEST_NAME = "batch.tsv"
DEFAULT_TIMEOUT_S = 600.0

_KINDS = ("identity", "smooth", "external")


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "smooth":
            radius = self.params.get("radius")
            if not isinstance(radius, int) or radius < 0:
                raise ConfigError("smooth backend needs integer params.radius >= 0")
        if self.kind == "external":
            cmd = self.params.get("command")
            if isinstance(cmd, str):
                cmd = shlex.split(cmd)
            if not cmd or not all(isinstance(c, str) for c in cmd):
                raise ConfigError("external backend needs a non-empty params.command")
            timeout = self.params.get("timeout_s", DEFAULT_TIMEOUT_S)
            if not timeout > 0:
                raise ConfigError("external backend timeout_s must be positive")

    @property
    def command(self) -> list[str]:
        cmd = self.params["command"]
        return shlex.split(cmd) if isinstance(cmd, str) else list(cmd)

    @property
    def timeout_s(self) -> float:
        return float(self.params.get("timeout_s", DEFAULT_TIMEOUT_S))


@dataclass(frozen=True)
class BatchItem:
    sample_id: str
    image_path: Path
    mask_path: Path


@dataclass(frozen=True)
class BatchRequest:
    items: tuple
    output_dir: Path

    @classmethod
    def build(cls, entries, output_dir) -> "BatchRequest":
        items = tuple(
            BatchItem(sid, Path(img), Path(msk)) for sid, img, msk in entries
        )
        ids = [it.sample_id for it in items]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate sample_ids in batch request")
        return cls(items=items, output_dir=Path(output_dir))


@dataclass(frozen=True)
class BatchResponse:
    outputs: tuple  # of (sample_id, Path), same ids and order as the request


def l2_reconstruction_loss(reconstructed: GrayImage, original: GrayImage) -> float:
    """Mean squared intensity error between reconstruction and original."""
    require_same_shape(reconstructed, original)
    diff = reconstructed.pixels - original.pixels
    return float(np.mean(diff * diff))


def smooth_background(image: GrayImage, mask: TargetMask, radius: int) -> GrayImage:
    """Box-mean blur over the clamped (2r+1)^2 window, background only."""
    require_same_shape(image, mask)
    if radius == 0:
        return image
    size = 2 * radius + 1
    px = image.pixels
    # Mean over in-bounds window pixels: constant-padded sum / in-bounds count.
    sums = uniform_filter(px, size=size, mode="constant", cval=0.0) * size * size
    counts = uniform_filter(np.ones_like(px), size=size, mode="constant") * size * size
    blurred = sums / counts
    return GrayImage(np.clip(np.where(mask.bits, px, blurred), 0.0, 1.0))


def _check_inputs(batch: BatchRequest) -> None:
    for it in batch.items:
        for p in (it.image_path, it.mask_path):
            if not Path(p).is_file():
                raise ConfigError(f"batch input missing: {p}")


def _validated_response(batch: BatchRequest, produced: dict) -> BatchResponse:
    """Reject partial or dimension-mismatched output sets atomically."""
    missing = [it.sample_id for it in batch.items if it.sample_id not in produced]
    if missing:
        raise BackendError(f"backend produced no output for: {', '.join(missing)}")
    for it in batch.items:
        out = load_gray_image(produced[it.sample_id])
        src = load_gray_image(it.image_path)
        if out.shape != src.shape:
            raise BackendError(
                f"backend output for {it.sample_id} has shape {out.shape}, "
                f"input was {src.shape}"
            )
    return BatchResponse(
        outputs=tuple((it.sample_id, produced[it.sample_id]) for it in batch.items)
    )


def _run_identity(batch: BatchRequest) -> dict:
    produced = {}
    for it in batch.items:
        dst = batch.output_dir / f"{it.sample_id}.png"
        shutil.copyfile(it.image_path, dst)
        produced[it.sample_id] = dst
    return produced


def _run_smooth(batch: BatchRequest, radius: int) -> dict:
    produced = {}
    for it in batch.items:
        img = load_gray_image(it.image_path)
        msk = load_target_mask(it.mask_path)
        out = smooth_background(img, msk, radius)
        dst = batch.output_dir / f"{it.sample_id}.png"
        save_gray_image(out, dst)
        produced[it.sample_id] = dst
    return produced


def _run_external(batch: BatchRequest, backend: BackendDescriptor) -> dict:
    staging = Path(
        tempfile.mkdtemp(prefix="iraug-backend-", dir=batch.output_dir.parent)
    )
    try:
        lines = []
        for it in batch.items:
            img_name = f"{it.sample_id}.png"
            msk_name = f"{it.sample_id}.mask.png"
            shutil.copyfile(it.image_path, staging / img_name)
            shutil.copyfile(it.mask_path, staging / msk_name)
            lines.append(f"{it.sample_id}\t{img_name}\t{msk_name}")
        manifest = staging / PROTOCOL_MANIFEST_NAME
        manifest.write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")

        cmd = backend.command + [
            "--input-dir", str(staging),
            "--output-dir", str(batch.output_dir),
            "--manifest", str(manifest),
        ]
        try:
            proc = subprocess.run(
                cmd, capture_output=True, text=True, timeout=backend.timeout_s
            )
        except subprocess.TimeoutExpired as exc:
            raise BackendError(
                f"backend {backend.name!r} timed out after {backend.timeout_s}s",
                stdout=str(exc.stdout or ""),
                stderr=str(exc.stderr or ""),
            ) from exc
        except OSError as exc:
            raise BackendError(
                f"backend {backend.name!r} could not be launched: {exc}"
            ) from exc
        if proc.returncode != 0:
            raise BackendError(
                f"backend {backend.name!r} exited with {proc.returncode}",
                stdout=proc.stdout,
                stderr=proc.stderr,
            )
        produced = {}
        for it in batch.items:
            out = batch.output_dir / f"{it.sample_id}.png"
            if out.is_file():
                produced[it.sample_id] = out
        return produced
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def reconstruct(batch: BatchRequest, backend: BackendDescriptor) -> BatchResponse:
    """Run one batch through a backend; outputs land in batch.output_dir."""
    _check_inputs(batch)
    batch.output_dir.mkdir(parents=True, exist_ok=True)
    if backend.kind == "identity":
        produced = _run_identity(batch)
    elif backend.kind == "smooth":
        produced = _run_smooth(batch, backend.params["radius"])
    elif backend.kind == "external":
        produced = _run_external(batch, backend)
    else:  # unreachable; descriptor validates kind
        raise ContractError(f"unhandled backend kind {backend.kind!r}")
    return _validated_response(batch, produced)

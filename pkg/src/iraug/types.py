"""Core raster types shared by every pipeline stage.

Intensities are normalized reals in [0, 1] regardless of the source bit
depth, so quantization, reconstruction and the latent-space math all work
in a single numeric domain. Instances are immutable after construction
(the backing arrays are frozen) and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, RasterFormatError


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster, row-major, values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ContractError(f"image must be 2-D, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise RasterFormatError(f"zero-dimension raster {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ContractError("image contains non-finite intensities")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ContractError(
                f"intensities outside [0,1]: min={px.min()}, max={px.max()}"
            )
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(
            self.pixels, other.pixels
        )


@dataclass(frozen=True)
class TargetMask:
    """Binary raster marking small-target pixels (True = target)."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ContractError(f"mask must be 2-D, got shape {b.shape}")
        if b.shape[0] < 1 or b.shape[1] < 1:
            raise RasterFormatError(f"zero-dimension mask {b.shape}")
        if b.dtype != np.bool_:
            uniq = np.unique(b)
            if not np.all(np.isin(uniq, (0, 1))):
                raise ContractError("mask values must be boolean or 0/1")
            b = b.astype(bool)
        object.__setattr__(self, "bits", _frozen(b))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def target_count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, TargetMask) and np.array_equal(self.bits, other.bits)


def require_same_shape(*rasters) -> None:
    """Reject dimension mismatches between paired images/masks."""
    shapes = {r.shape for r in rasters}
    if len(shapes) > 1:
        raise ContractError(f"dimension mismatch: {sorted(shapes)}")

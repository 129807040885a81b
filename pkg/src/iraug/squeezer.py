"""Gaussian group squeezer: mask-aware non-uniform intensity quantization.

The interval count Num is drawn from a clamped, rounded Gaussian. The
quantizer's interior edges are Num-1 uniform draws over the image's
intensity range, sorted, with the range minimum prepended and the maximum
(plus one float step, so the top interval stays half-open) appended. Each
interval gets a replacement value drawn uniformly inside it. Quantization
replaces background pixels with their interval's replacement value and
leaves target pixels untouched; pixel copy-paste re-implants original
target pixels into any generated image.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError
from .rng import RandomnessContext
from .types import GrayImage, TargetMask, require_same_shape


@dataclass(frozen=True)
class GaussianSamplerConfig:
    """Distribution of the interval count Num.

    Defaults follow the operating point used throughout: mean 17, spread 4,
    counts clamped to [2, 256] (a single interval is a no-op squeeze and
    counts above 256 exceed 8-bit distinguishability; 1 is allowed only by
    explicit min_bins).
    """

    mu: float = 17.0
    sigma: float = 4.0
    min_bins: int = 2
    max_bins: int = 256

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.min_bins < 1:
            raise ConfigError(f"min_bins must be >= 1, got {self.min_bins}")
        if self.min_bins > self.max_bins:
            raise ConfigError(
                f"min_bins {self.min_bins} exceeds max_bins {self.max_bins}"
            )


@dataclass(frozen=True)
class QuantSpec:
    """Sampled quantizer state: strictly increasing interval edges and one
    replacement value inside each interval."""

    edges: np.ndarray
    replacements: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        reps = np.asarray(self.replacements, dtype=np.float64)
        if edges.ndim != 1 or edges.size < 2:
            raise ContractError("edges must be a 1-D array of at least 2 values")
        if not np.all(np.diff(edges) > 0):
            raise ContractError("edges must be strictly increasing")
        if reps.shape != (edges.size - 1,):
            raise ContractError(
                f"need {edges.size - 1} replacements, got {reps.size}"
            )
        if np.any(reps < edges[:-1]) or np.any(reps >= edges[1:]):
            raise ContractError("each replacement must lie inside its interval")
        for name, arr in (("edges", edges), ("replacements", reps)):
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"{name} contain non-finite values")
        object.__setattr__(self, "edges", _readonly(edges))
        object.__setattr__(self, "replacements", _readonly(reps))

    @property
    def num_intervals(self) -> int:
        return self.edges.size - 1

    def to_json_dict(self) -> dict:
        """Full-precision serialization for the manifest (repr round-trips)."""
        return {
            "edges": [float(v) for v in self.edges],
            "replacements": [float(v) for v in self.replacements],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "QuantSpec":
        return cls(np.asarray(d["edges"]), np.asarray(d["replacements"]))

    def digest(self) -> str:
        payload = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


def sample_bin_count(cfg: GaussianSamplerConfig, rng: RandomnessContext) -> int:
    """Draw Num = clamp(round(N(mu, sigma)), min_bins, max_bins)."""
    gen = rng.generator()
    draw = gen.normal(cfg.mu, cfg.sigma)
    return int(np.clip(round(draw), cfg.min_bins, cfg.max_bins))


def build_quant_spec(image: GrayImage, num: int, rng: RandomnessContext) -> QuantSpec:
    """Sample a quantizer with `num` intervals spanning the image's range.

    A constant image degenerates to a single identity interval. Duplicate
    sampled edges are nudged by one float step rather than resampled, so the
    draw count stays fixed for a given (image, num, context).
    """
    if num < 1:
        raise ContractError(f"num must be >= 1, got {num}")
    lo = float(image.pixels.min())
    hi = float(image.pixels.max())
    if lo == hi:
        edges = np.array([lo, np.nextafter(lo, np.inf)])
        return QuantSpec(edges=edges, replacements=np.array([lo]))

    gen = rng.generator()
    interior = np.sort(gen.uniform(lo, hi, size=num - 1))
    edges = np.concatenate(([lo], interior, [np.nextafter(hi, np.inf)]))
    # Restore strict monotonicity after ties (including draws landing on lo/hi).
    for i in range(1, edges.size):
        if edges[i] <= edges[i - 1]:
            edges[i] = np.nextafter(edges[i - 1], np.inf)

    lows, highs = edges[:-1], edges[1:]
    reps = gen.uniform(lows, highs)
    # uniform() may round up to the open upper bound; keep replacements inside
    # the half-open interval (one-ulp intervals collapse to their left edge).
    reps = np.clip(reps, lows, np.nextafter(highs, -np.inf))
    return QuantSpec(edges=edges, replacements=reps)


def apply_quantization(
    image: GrayImage, mask: TargetMask, spec: QuantSpec
) -> GrayImage:
    """Replace background pixels with their interval's replacement value;
    target pixels pass through bit-identical."""
    require_same_shape(image, mask)
    px = image.pixels
    if px.min() < spec.edges[0] or px.max() >= spec.edges[-1]:
        raise ContractError(
            "stale quantization spec: image intensities outside spec range"
        )
    idx = np.searchsorted(spec.edges, px, side="right") - 1
    quantized = spec.replacements[idx]
    out = np.where(mask.bits, px, quantized)
    return GrayImage(out)


def pixel_copy_paste(
    generated: GrayImage, original: GrayImage, mask: TargetMask
) -> GrayImage:
    """Re-implant original target pixels into a generated image."""
    require_same_shape(generated, original, mask)
    out = np.where(mask.bits, original.pixels, generated.pixels)
    return GrayImage(out)

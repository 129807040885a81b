"""Shared synthetic-scene builders for the test suite.

Scenes are smooth cluttered backgrounds with a few small bright target
blobs; intensities snap to the 8-bit grid by default so PNG round trips
are exact and target-preservation checks can compare bit-for-bit.
"""

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from iraug.raster import save_gray_image, save_target_mask
from iraug.types import GrayImage, TargetMask

_BLOB_OFFSETS = ((0, 0), (0, 1), (1, 0), (1, 1), (-1, 0), (0, -1))


def make_scene(seed, h=24, w=24, n_targets=2, eight_bit=True):
    """Deterministic (image, mask) pair with small bright targets."""
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.random((h, w)), sigma=2.0)
    lo, hi = base.min(), base.max()
    span = hi - lo if hi > lo else 1.0
    bg = 0.1 + 0.6 * (base - lo) / span
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(n_targets):
        r = int(rng.integers(2, h - 2))
        c = int(rng.integers(2, w - 2))
        size = int(rng.integers(1, 5))
        for dr, dc in _BLOB_OFFSETS[:size]:
            rr, cc = r + dr, c + dc
            mask[rr, cc] = True
            bg[rr, cc] = 0.9 + 0.1 * rng.random()
    bg = np.clip(bg, 0.0, 1.0)
    if eight_bit:
        bg = np.round(bg * 255.0) / 255.0
    return GrayImage(bg), TargetMask(mask)


def write_dataset(root, n, seed=0, h=24, w=24):
    """Materialize n scenes under root/images + root/masks; returns ids."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    ids = []
    for i in range(n):
        img, mask = make_scene(seed + i, h=h, w=w)
        sid = f"s{i:03d}"
        save_gray_image(img, root / "images" / f"{sid}.png")
        save_target_mask(mask, root / "masks" / f"{sid}.png")
        ids.append(sid)
    return ids

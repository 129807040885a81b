"""Synthetic training scenes: smooth cluttered backgrounds with small bright
targets, plus a heavy two-level quantizer to corrupt them. Materialized as
(quantized, original, mask) PNG triples so training is file-based."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def make_scene(rng: np.random.Generator, h: int = 32, w: int = 32):
    """Returns (image, mask) as float [0,1] / bool arrays."""
    rows, cols = np.mgrid[0:h, 0:w]
    bg = np.zeros((h, w))
    for _ in range(3):
        fr, fc = rng.uniform(-0.08, 0.08, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        bg += rng.uniform(0.3, 1.0) * np.cos(2 * np.pi * (fr * rows + fc * cols) + phase)
    lo, hi = bg.min(), bg.max()
    span = hi - lo if hi > lo else 1.0
    img = 0.1 + 0.55 * (bg - lo) / span
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(int(rng.integers(1, 3))):
        r = int(rng.integers(2, h - 2))
        c = int(rng.integers(2, w - 2))
        for dr, dc in ((0, 0), (0, 1), (1, 0)):
            mask[r + dr, c + dc] = True
            img[r + dr, c + dc] = 0.9 + 0.1 * rng.random()
    img = np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
    return img, mask


def quantize_two_level(img: np.ndarray, mask: np.ndarray, rng: np.random.Generator):
    """Crush the background to two randomly placed intensity levels; target
    pixels pass through untouched."""
    lo, hi = float(img.min()), float(img.max())
    edge = rng.uniform(lo, hi)
    low_rep = rng.uniform(lo, edge)
    high_rep = rng.uniform(edge, hi)
    quant = np.where(img < edge, low_rep, high_rep)
    return np.where(mask, img, quant)


def _save_png(arr: np.ndarray, path: Path) -> None:
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8)).save(path)


def load_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.float64) / 255.0


def build_training_set(out_dir, count: int, seed: int = 0, h: int = 32, w: int = 32,
                       identity_pairs: bool = False) -> None:
    """Write count (quantized, original, mask) triples under out_dir.

    identity_pairs=True writes the original as its own 'quantized' partner,
    which is useful as a learnability sanity check.
    """
    out = Path(out_dir)
    for name in ("original", "quantized", "masks"):
        (out / name).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        img, mask = make_scene(rng, h, w)
        quant = img if identity_pairs else quantize_two_level(img, mask, rng)
        sid = f"s{i:04d}"
        _save_png(img, out / "original" / f"{sid}.png")
        _save_png(quant, out / "quantized" / f"{sid}.png")
        _save_png(mask.astype(float), out / "masks" / f"{sid}.png")


def load_training_set(data_dir):
    """Returns (quantized, original) arrays of shape (n, h, w), paired by stem."""
    data = Path(data_dir)
    orig_dir, quant_dir = data / "original", data / "quantized"
    if not orig_dir.is_dir() or not quant_dir.is_dir():
        raise FileNotFoundError(
            f"{data} must contain original/ and quantized/ directories"
        )
    quant, orig = [], []
    for q in sorted(quant_dir.glob("*.png")):
        o = orig_dir / q.name
        if not o.is_file():
            raise FileNotFoundError(f"no original pair for {q.name}")
        quant.append(load_png(q))
        orig.append(load_png(o))
    if not quant:
        raise FileNotFoundError(f"no training pairs in {data}")
    return np.stack(quant), np.stack(orig)

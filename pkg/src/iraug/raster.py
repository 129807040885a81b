"""Grayscale raster I/O: PNG (via Pillow) and binary PGM (P5), 8/16-bit.

Loading normalizes to [0, 1] by the declared bit depth of the source
(255 for 8-bit, 65535 for 16-bit PNG, the header maxval for PGM).
Multi-channel PNG inputs are luma-reduced. Mask files binarize at
raw value > half scale, i.e. > 127 for the usual 0/255 mask encoding.
"""

from __future__ import annotations

import io
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import RasterFormatError, RasterIOError
from .types import GrayImage, TargetMask

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise RasterIOError(f"cannot read raster {path}: {exc}") from exc


def _parse_pgm(data: bytes, path) -> np.ndarray:
    """Binary P5 parser returning a float array already normalized by maxval."""
    # Header tokens may be separated by whitespace and '#' comments.
    pos = 0
    tokens = []
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*([^\s#]+)").match(data, pos)
        if m is None:
            raise RasterFormatError(f"truncated PGM header in {path}")
        tokens.append(m.group(2))
        pos = m.end()
    if tokens[0] != b"P5":
        raise RasterFormatError(f"not a binary PGM (P5) file: {path}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise RasterFormatError(f"bad PGM header in {path}") from exc
    if width < 1 or height < 1:
        raise RasterFormatError(f"zero-dimension raster {width}x{height} in {path}")
    if not 0 < maxval < 65536:
        raise RasterFormatError(f"PGM maxval {maxval} out of range in {path}")
    # Exactly one whitespace byte separates the header from raster data.
    raw = data[pos + 1 :]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    if len(raw) < need:
        raise RasterFormatError(f"PGM pixel data truncated in {path}")
    arr = np.frombuffer(raw[:need], dtype=dtype).reshape(height, width)
    return arr.astype(np.float64) / float(maxval)


def _decode_png(data: bytes, path) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise RasterFormatError(f"cannot decode PNG {path}: {exc}") from exc
    if img.width < 1 or img.height < 1:
        raise RasterFormatError(f"zero-dimension raster in {path}")
    if img.mode in ("I;16", "I;16B", "I"):
        arr = np.asarray(img, dtype=np.float64)
        return arr / 65535.0
    if img.mode != "L":
        img = img.convert("L")  # luma reduction for RGB/RGBA/palette inputs
    return np.asarray(img, dtype=np.float64) / 255.0


def _load_normalized(path) -> np.ndarray:
    data = _read_bytes(path)
    if data.startswith(_PNG_MAGIC):
        return _decode_png(data, path)
    if data.startswith(b"P5"):
        return _parse_pgm(data, path)
    raise RasterFormatError(f"unrecognized raster format in {path}")


def load_gray_image(path) -> GrayImage:
    """Load an 8/16-bit grayscale PNG or binary PGM as a normalized image."""
    return GrayImage(_load_normalized(path))


def load_target_mask(path) -> TargetMask:
    """Load a mask raster; raw values above half scale mark target pixels."""
    return TargetMask(_load_normalized(path) > 0.5)


def _quantize_to_depth(img: GrayImage, bit_depth: int) -> np.ndarray:
    if bit_depth == 8:
        return np.round(img.pixels * 255.0).astype(np.uint8)
    if bit_depth == 16:
        return np.round(img.pixels * 65535.0).astype(np.uint16)
    raise RasterFormatError(f"unsupported bit depth {bit_depth}")


def save_gray_image(img: GrayImage, path, bit_depth: int = 8) -> None:
    """Write a PNG or PGM (chosen by extension, default PNG)."""
    path = Path(path)
    arr = _quantize_to_depth(img, bit_depth)
    try:
        if path.suffix.lower() == ".pgm":
            maxval = 255 if bit_depth == 8 else 65535
            payload = arr.astype(">u2").tobytes() if bit_depth == 16 else arr.tobytes()
            header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
            path.write_bytes(header + payload)
        else:
            Image.fromarray(arr).save(path, format="PNG")
    except OSError as exc:
        raise RasterIOError(f"cannot write raster {path}: {exc}") from exc


def save_target_mask(mask: TargetMask, path) -> None:
    """Write a mask as an 8-bit 0/255 raster."""
    img = GrayImage(mask.bits.astype(np.float64))
    save_gray_image(img, path, bit_depth=8)

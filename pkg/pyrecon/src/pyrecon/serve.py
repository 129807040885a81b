"""Directory-batch serving.

Invocation contract: read a TSV manifest of `sample_id<TAB>image<TAB>mask`
lines, reconstruct every image from the input directory, write
`<sample_id>.png` into the output directory, exit 0. Missing checkpoint or
manifest exits nonzero with a message on stderr. One batch at a time."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .data import load_png
from .model import load_checkpoint


def serve_batch(input_dir, output_dir, manifest, checkpoint) -> int:
    checkpoint = Path(checkpoint)
    manifest = Path(manifest)
    if not checkpoint.is_file():
        print(f"pyrecon: checkpoint not found: {checkpoint}", file=sys.stderr)
        return 2
    if not manifest.is_file():
        print(f"pyrecon: manifest not found: {manifest}", file=sys.stderr)
        return 2
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for line in manifest.read_text("utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            print(f"pyrecon: malformed manifest line: {line!r}", file=sys.stderr)
            return 2
        entries.append(parts)
    if not entries:
        return 0

    model = load_checkpoint(checkpoint)
    with torch.no_grad():
        for sid, image_name, _mask_name in entries:
            src = input_dir / image_name
            if not src.is_file():
                print(f"pyrecon: input image missing: {src}", file=sys.stderr)
                return 2
            x = torch.from_numpy(load_png(src)).unsqueeze(0).unsqueeze(0)
            y = model(x).squeeze().numpy()
            out = np.round(np.clip(y, 0.0, 1.0) * 255.0).astype(np.uint8)
            Image.fromarray(out).save(output_dir / f"{sid}.png")
    return 0

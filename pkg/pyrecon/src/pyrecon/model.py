"""Small convolutional encoder-decoder for coarse image restoration.

Deliberately plain: one stride-2 downsampling stage, a nearest-neighbor
upsample back, sigmoid output. Weights are float64 so the finite-difference
gradient check is clean. Output dimensions always equal input dimensions
(inputs are replicate-padded to even sizes and cropped back).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 25_000
    lr: float = 1e-3
    batch_size: int = 3
    seed: int = 0
    holdout_fraction: float = 0.2


class ToyReconModel(nn.Module):
    def __init__(self, width: int = 8):
        super().__init__()
        self.width = width
        self.down = nn.Conv2d(1, width, 3, stride=2, padding=1)
        self.mid = nn.Conv2d(width, 2 * width, 3, padding=1)
        self.up = nn.Conv2d(2 * width, width, 3, padding=1)
        self.out = nn.Conv2d(width, 1, 3, padding=1)
        self.double()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2], x.shape[-1]
        pad_h, pad_w = h % 2, w % 2
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
        z = F.relu(self.down(x))
        z = F.relu(self.mid(z))
        z = F.interpolate(z, scale_factor=2, mode="nearest")
        z = F.relu(self.up(z))
        y = torch.sigmoid(self.out(z))
        return y[..., :h, :w]


def save_checkpoint(model: ToyReconModel, path, extra: dict | None = None) -> None:
    payload = {"width": model.width, "state_dict": model.state_dict()}
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def load_checkpoint(path) -> ToyReconModel:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = ToyReconModel(width=payload["width"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model

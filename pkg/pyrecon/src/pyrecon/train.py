"""Training loop with a finite-difference gradient gate and an
identity-baseline comparison on held-out pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .data import load_training_set
from .model import ToyReconModel, TrainConfig, save_checkpoint


class TrainingDiverged(RuntimeError):
    pass


class GradientCheckFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainResult:
    checkpoint_path: str
    steps: int
    initial_loss: float
    final_loss: float
    holdout_loss: float
    identity_baseline: float  # held-out MSE of returning the input unchanged


def finite_difference_gradient_check(
    model: ToyReconModel, x: torch.Tensor, y: torch.Tensor, n_entries: int = 3,
    h: float = 1e-6, rel_tol: float = 1e-4,
) -> None:
    """Compare autograd against central differences on a slice of the first
    conv kernel. Cheap gate against a silently broken loss/graph."""
    model.zero_grad()
    loss = F.mse_loss(model(x), y)
    loss.backward()
    weight = model.down.weight
    grads = weight.grad.detach().clone()
    flat = weight.detach().reshape(-1)
    with torch.no_grad():
        for k in range(n_entries):
            orig = flat[k].item()
            flat[k] = orig + h
            up = F.mse_loss(model(x), y).item()
            flat[k] = orig - h
            down = F.mse_loss(model(x), y).item()
            flat[k] = orig
            numeric = (up - down) / (2 * h)
            analytic = grads.reshape(-1)[k].item()
            scale = max(abs(numeric), abs(analytic), 1e-8)
            if abs(numeric - analytic) / scale > rel_tol:
                raise GradientCheckFailed(
                    f"entry {k}: analytic {analytic:.3e} vs numeric {numeric:.3e}"
                )
    model.zero_grad()


def train_toy(dataset_dir, checkpoint_path, config: TrainConfig = TrainConfig(),
              model: ToyReconModel | None = None) -> TrainResult:
    """Fit the model to (quantized -> original) pairs with L2 loss.

    Raises TrainingDiverged on a non-finite loss and GradientCheckFailed if
    the pre-flight finite-difference check disagrees with autograd. The
    held-out identity baseline (MSE of the untouched quantized input) is
    stored in the checkpoint for auditability.
    """
    quant, orig = load_training_set(dataset_dir)
    n = quant.shape[0]
    n_hold = max(1, int(round(config.holdout_fraction * n))) if n > 1 else 0
    x_all = torch.from_numpy(quant).unsqueeze(1)
    y_all = torch.from_numpy(orig).unsqueeze(1)
    x_train, y_train = x_all[: n - n_hold], y_all[: n - n_hold]
    x_hold, y_hold = x_all[n - n_hold :], y_all[n - n_hold :]

    torch.manual_seed(config.seed)
    if model is None:
        model = ToyReconModel()
    finite_difference_gradient_check(model, x_train[:2], y_train[:2])

    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    gen = np.random.default_rng(config.seed)
    initial = final = None
    for step in range(config.steps):
        idx = gen.integers(0, x_train.shape[0], size=config.batch_size)
        xb, yb = x_train[idx], y_train[idx]
        opt.zero_grad()
        loss = F.mse_loss(model(xb), yb)
        if not torch.isfinite(loss):
            raise TrainingDiverged(
                f"non-finite loss at step {step}: {loss.item()!r}"
            )
        loss.backward()
        opt.step()
        if initial is None:
            initial = loss.item()
        final = loss.item()

    model.eval()
    with torch.no_grad():
        if n_hold:
            holdout = F.mse_loss(model(x_hold), y_hold).item()
            baseline = F.mse_loss(x_hold, y_hold).item()
        else:
            holdout = F.mse_loss(model(x_train), y_train).item()
            baseline = F.mse_loss(x_train, y_train).item()
    save_checkpoint(
        model, checkpoint_path,
        extra={
            "steps": config.steps,
            "holdout_loss": holdout,
            "identity_baseline": baseline,
        },
    )
    return TrainResult(
        checkpoint_path=str(checkpoint_path),
        steps=config.steps,
        initial_loss=float(initial if initial is not None else 0.0),
        final_loss=float(final if final is not None else 0.0),
        holdout_loss=float(holdout),
        identity_baseline=float(baseline),
    )

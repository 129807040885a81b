"""Diffusion-stage mathematics, verified at desk scale.

Implements the noise schedule, the closed-form forward noising step
z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps, the noise-prediction and
resample losses (per-element means, so magnitudes are shape-independent),
and strided ancestral sampling against a pluggable denoiser. The built-in
denoisers are analytic: a zero predictor, a fixed-noise oracle, and the
exact posterior-mean predictor for an elementwise Gaussian prior, which
together make every sampler property checkable without any trained network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .errors import ConfigError, ContractError
from .rng import RandomnessContext
from .types import GrayImage


@dataclass(frozen=True)
class LatentTensor:
    """Immutable real tensor with finite entries."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ContractError("latent contains non-finite values")
        v = np.array(v, copy=True)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule beta_t for t = 1..T with derived running products."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise ConfigError("schedule needs at least one step")
        if np.any(b <= 0.0) or np.any(b >= 1.0):
            raise ConfigError("every beta must lie in (0, 1)")
        b = np.array(b, copy=True)
        b.flags.writeable = False
        object.__setattr__(self, "betas", b)

    @property
    def num_steps(self) -> int:
        return self.betas.size

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def alpha_bar(self, t: int) -> float:
        """Cumulative product at step t, with abar(0) defined as 1."""
        if t == 0:
            return 1.0
        self._check_step(t)
        return float(self.alpha_bars[t - 1])

    def _check_step(self, t: int) -> None:
        if not 1 <= t <= self.num_steps:
            raise ContractError(f"step {t} outside schedule 1..{self.num_steps}")

    def export_table(self) -> str:
        """Two-column (t, beta_t) text table for cross-implementation checks."""
        lines = ["# t\tbeta"]
        lines += [f"{t + 1}\t{float(b)!r}" for t, b in enumerate(self.betas)]
        return "\n".join(lines) + "\n"


def build_schedule(
    kind: str, num_steps: int, beta_start: float, beta_end: Optional[float] = None
) -> NoiseSchedule:
    """Construct a linear or constant beta schedule."""
    if beta_end is None:
        beta_end = beta_start
    if num_steps < 1:
        raise ConfigError(f"num_steps must be >= 1, got {num_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"betas must satisfy 0 < start <= end < 1, got ({beta_start}, {beta_end})"
        )
    if kind == "linear":
        betas = np.linspace(beta_start, beta_end, num_steps)
    elif kind == "constant":
        if beta_end != beta_start:
            raise ConfigError("constant schedule requires beta_start == beta_end")
        betas = np.full(num_steps, beta_start)
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(betas=betas)


class Denoiser(Protocol):
    """Noise predictor with optional conditioning; must be shape-preserving
    and safe for concurrent read-only use."""

    def predict(
        self, z_t: LatentTensor, t: int, c: Optional[LatentTensor] = None
    ) -> LatentTensor: ...


class ZeroDenoiser:
    """Predicts zero noise everywhere."""

    def predict(self, z_t, t, c=None) -> LatentTensor:
        return LatentTensor(np.zeros(z_t.shape))


class FixedNoiseDenoiser:
    """Returns one fixed noise tensor regardless of input; this is the exact
    predictor when that tensor was the noise used in a single forward step."""

    def __init__(self, eps: LatentTensor):
        self.eps = eps

    def predict(self, z_t, t, c=None) -> LatentTensor:
        if self.eps.shape != z_t.shape:
            raise ContractError("fixed noise shape does not match latent")
        return self.eps


class GaussianPriorDenoiser:
    """Exact posterior-mean noise predictor for z0 ~ N(mu0, sigma0^2) i.i.d.

    E[z0 | z_t] is linear in z_t for a Gaussian prior; the implied optimal
    noise estimate is (z_t - sqrt(abar_t) E[z0 | z_t]) / sqrt(1 - abar_t).
    """

    def __init__(self, mu0: float, sigma0: float, schedule: NoiseSchedule):
        self.mu0 = float(mu0)
        self.var0 = float(sigma0) ** 2
        self.schedule = schedule

    def posterior_mean_z0(self, z_t: np.ndarray, t: int) -> np.ndarray:
        a = self.schedule.alpha_bar(t)
        gain = math.sqrt(a) * self.var0 / (a * self.var0 + 1.0 - a)
        return self.mu0 + gain * (z_t - math.sqrt(a) * self.mu0)

    def predict(self, z_t, t, c=None) -> LatentTensor:
        a = self.schedule.alpha_bar(t)
        z0_hat = self.posterior_mean_z0(z_t.values, t)
        eps = (z_t.values - math.sqrt(a) * z0_hat) / math.sqrt(1.0 - a)
        return LatentTensor(eps)


def forward_noise(
    z0: LatentTensor, t: int, eps: LatentTensor, sched: NoiseSchedule
) -> LatentTensor:
    """One-shot forward noising to step t."""
    sched._check_step(t)
    if z0.shape != eps.shape:
        raise ContractError(f"shape mismatch: z0 {z0.shape} vs eps {eps.shape}")
    a = sched.alpha_bar(t)
    return LatentTensor(math.sqrt(a) * z0.values + math.sqrt(1.0 - a) * eps.values)


def ldm_loss(eps_true: LatentTensor, eps_pred: LatentTensor) -> float:
    """Mean squared error between true and predicted noise."""
    if eps_true.shape != eps_pred.shape:
        raise ContractError(
            f"shape mismatch: {eps_true.shape} vs {eps_pred.shape}"
        )
    diff = eps_true.values - eps_pred.values
    return float(np.mean(diff * diff))


def resample_loss(z0_prime: LatentTensor, z0: LatentTensor) -> float:
    """Mean squared error between resampled and reference latents."""
    return ldm_loss(z0_prime, z0)


def jump_step_indices(total_steps: int, num_steps: int) -> list[int]:
    """Evenly strided descending subsequence of {T..1}, endpoints included."""
    if not 1 <= num_steps <= total_steps:
        raise ContractError(
            f"num_steps must be in 1..{total_steps}, got {num_steps}"
        )
    grid = np.round(np.linspace(total_steps, 1, num_steps)).astype(int)
    steps, seen = [], set()
    for t in grid:
        if int(t) not in seen:
            steps.append(int(t))
            seen.add(int(t))
    return steps


def jump_sample(
    zT: LatentTensor,
    denoiser: Denoiser,
    sched: NoiseSchedule,
    num_steps: int = 50,
    rng: Optional[RandomnessContext] = None,
) -> LatentTensor:
    """Strided ancestral sampling from z_T down to z0'.

    Visits an evenly spaced subsequence of steps (T and 1 always included).
    Each visited step applies the posterior update with the effective
    one-jump alpha and the lower-variance posterior (beta-tilde) noise term;
    the final step to 0 is deterministic.
    """
    if rng is None:
        raise ContractError("jump_sample requires a RandomnessContext")
    steps = jump_step_indices(sched.num_steps, num_steps)
    gen = rng.generator()
    z = zT.values
    for i, t in enumerate(steps):
        t_prev = steps[i + 1] if i + 1 < len(steps) else 0
        eps = denoiser.predict(LatentTensor(z), t)
        if eps.shape != zT.shape:
            raise ContractError(
                f"denoiser returned shape {eps.shape}, expected {zT.shape}"
            )
        a = sched.alpha_bar(t)
        p = sched.alpha_bar(t_prev)
        alpha_eff = a / p
        beta_eff = 1.0 - alpha_eff
        z0_hat = (z - math.sqrt(1.0 - a) * eps.values) / math.sqrt(a)
        mean = (
            math.sqrt(p) * beta_eff / (1.0 - a) * z0_hat
            + math.sqrt(alpha_eff) * (1.0 - p) / (1.0 - a) * z
        )
        if t_prev > 0:
            var = beta_eff * (1.0 - p) / (1.0 - a)
            z = mean + math.sqrt(var) * gen.standard_normal(z.shape)
        else:
            z = mean
    return LatentTensor(z)


class OrthogonalCodec:
    """Stand-in latent codec: a fixed orthonormal down-projection.

    encode() projects the flattened image onto `rank` orthonormal basis
    vectors; decode() maps back, so decode(encode(x)) is the orthogonal
    projection of x (exact round trip at full rank). This is a stub for a
    learned autoencoder and is documented as such.
    """

    def __init__(self, height: int, width: int, rank: int, rng: RandomnessContext):
        n = height * width
        if not 1 <= rank <= n:
            raise ConfigError(f"rank must be in 1..{n}, got {rank}")
        self.height = height
        self.width = width
        self.rank = rank
        gen = rng.generator()
        q, _ = np.linalg.qr(gen.standard_normal((n, rank)))
        self.basis = q.T  # rank x n, orthonormal rows

    def encode(self, image: GrayImage) -> LatentTensor:
        if image.shape != (self.height, self.width):
            raise ContractError(
                f"image shape {image.shape} does not match codec "
                f"({self.height}, {self.width})"
            )
        return LatentTensor(self.basis @ image.pixels.ravel())

    def decode(self, latent: LatentTensor) -> np.ndarray:
        """Raw reconstruction (may leave [0,1]; see decode_to_image)."""
        if latent.shape != (self.rank,):
            raise ContractError(
                f"latent shape {latent.shape} does not match rank {self.rank}"
            )
        flat = self.basis.T @ latent.values
        return flat.reshape(self.height, self.width)

    def decode_to_image(self, latent: LatentTensor) -> GrayImage:
        return GrayImage(np.clip(self.decode(latent), 0.0, 1.0))

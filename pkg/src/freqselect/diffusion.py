"""Forward noising, noise-prediction loss and a deterministic reverse loop.

Naming follows the retention convention: ``beta_bar[t]`` is the fraction of
signal kept after ``t`` steps, so ``z_t = sqrt(beta_bar_t) z0 +
sqrt(1 - beta_bar_t) eps``. (In DDPM notation this quantity is usually
called ``alpha_bar``.) Steps are 1-based; ``beta_bar_0 = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from freqselect.errors import NumericalError, ValidationError

# (z_t, t, conditioning) -> predicted noise
NoisePredictor = Callable[[np.ndarray, int, Optional[np.ndarray]], np.ndarray]

DEFAULT_STEPS = 50
DEFAULT_T_INIT = 37


@dataclass(frozen=True)
class DiffusionSchedule:
    betas: np.ndarray
    beta_bar: np.ndarray

    @property
    def steps(self) -> int:
        return self.betas.size

    def retention(self, t: int) -> float:
        """``beta_bar_t`` with ``beta_bar_0 = 1``."""
        return 1.0 if t == 0 else float(self.beta_bar[t - 1])

    def to_csv(self) -> str:
        lines = ["t,beta,beta_bar"]
        for t, (b, bb) in enumerate(zip(self.betas, self.beta_bar), start=1):
            lines.append(f"{t},{float(b)!r},{float(bb)!r}")
        return "\n".join(lines) + "\n"


def make_schedule(
    steps: int = DEFAULT_STEPS,
    retention_start: float = 0.9999,
    retention_end: float = 0.98,
) -> DiffusionSchedule:
    """Per-step retention factors linearly spaced from start to end."""
    if int(steps) != steps or steps < 1:
        raise ValidationError(f"steps must be a positive integer, got {steps!r}")
    if not (0.0 < retention_end <= retention_start <= 1.0):
        raise ValidationError(
            f"need 0 < retention_end <= retention_start <= 1, got {retention_start}, {retention_end}"
        )
    betas = np.linspace(float(retention_start), float(retention_end), int(steps))
    beta_bar = np.empty_like(betas)
    acc = 1.0
    for i, b in enumerate(betas):
        acc *= b
        beta_bar[i] = acc
    betas.setflags(write=False)
    beta_bar.setflags(write=False)
    return DiffusionSchedule(betas, beta_bar)


def _check_step(t: int, schedule: DiffusionSchedule):
    if int(t) != t or not 1 <= t <= schedule.steps:
        raise ValidationError(f"step {t!r} outside [1, {schedule.steps}]")


def forward_noise(
    z0,
    t: int,
    schedule: DiffusionSchedule,
    noise=None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Noisy latent at step ``t``; draws standard normal noise from ``rng`` if none is given."""
    _check_step(t, schedule)
    z0 = np.asarray(z0, dtype=np.float64)
    if noise is None:
        noise = (rng or np.random.default_rng()).standard_normal(z0.shape)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != z0.shape:
        raise ValidationError(f"noise shape {noise.shape} does not match latent {z0.shape}")
    bb = schedule.retention(t)
    return np.sqrt(bb) * z0 + np.sqrt(1.0 - bb) * noise


def _predict(predictor: NoisePredictor, z, t, conditioning) -> np.ndarray:
    eps = np.asarray(predictor(z, t, conditioning), dtype=np.float64)
    if eps.shape != z.shape:
        raise ValidationError(f"predictor returned shape {eps.shape}, expected {z.shape}")
    return eps


def noise_prediction_loss(
    predictor: NoisePredictor,
    z0,
    t: int,
    conditioning,
    schedule: DiffusionSchedule,
    noise,
) -> float:
    """Squared error between the injected noise and the predictor's estimate."""
    noise = np.asarray(noise, dtype=np.float64)
    zt = forward_noise(z0, t, schedule, noise)
    return float(np.sum((noise - _predict(predictor, zt, t, conditioning)) ** 2))


def reverse_denoise(
    z_init,
    t_init: int,
    predictor: NoisePredictor,
    schedule: DiffusionSchedule,
    conditioning=None,
) -> np.ndarray:
    """Deterministic DDIM-style loop from ``t_init`` down to 0; returns the clean estimate.

    Calls ``predictor`` exactly ``t_init`` times.
    """
    _check_step(t_init, schedule)
    z = np.asarray(z_init, dtype=np.float64).copy()
    z0_hat = z
    for t in range(int(t_init), 0, -1):
        eps = _predict(predictor, z, t, conditioning)
        bb = schedule.retention(t)
        prev = schedule.retention(t - 1)
        with np.errstate(invalid="ignore", over="ignore"):
            z0_hat = (z - np.sqrt(1.0 - bb) * eps) / np.sqrt(bb)
            z = np.sqrt(prev) * z0_hat + np.sqrt(1.0 - prev) * eps
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"non-finite latent at reverse step {t}")
    return z0_hat


def oracle_predictor(true_noise) -> NoisePredictor:
    """A predictor that always answers with the noise actually injected."""
    eps = np.asarray(true_noise, dtype=np.float64)
    return lambda z, t, c: eps


def zero_predictor(z, t, c):
    return np.zeros_like(z)

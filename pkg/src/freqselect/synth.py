"""Synthetic stand-ins for natural images and fMRI responses.

Images have a ``1/r**exponent`` amplitude spectrum with random phases.
Voxel responses are a fixed Gaussian projection of the image after a
ground-truth per-band gain profile, plus Gaussian noise, so that ridge
regression is the optimal decoder and only the band profile is unknown.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from freqselect.errors import ValidationError
from freqselect.spectral import BandMaskSet, MaskMode, band_decompose, make_band_masks, radial_distance


def _default_profile() -> list[float]:
    return [1.0] * 4 + [0.0] * 12


@dataclass
class SynthConfig:
    n_samples: int = 640
    shape: tuple[int, int, int] = (3, 64, 64)
    spectral_exponent: float = 1.0
    gt_profile: list[float] = field(default_factory=_default_profile)
    voxel_dim: int = 384
    noise_sigma: float = 0.1
    nu_max: float = 32.0
    mask_mode: str = "partition"
    channel_correlation: float = 0.99
    rng_seed: int = 0

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.gt_profile = [float(g) for g in self.gt_profile]
        if self.n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        if len(self.shape) != 3 or min(self.shape) < 1 or min(self.shape[1:]) < 2:
            raise ValidationError(f"bad image shape {self.shape}")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if not self.gt_profile:
            raise ValidationError("gt_profile must be non-empty")
        if self.voxel_dim < 1:
            raise ValidationError("voxel_dim must be >= 1")
        if not 0.0 <= self.channel_correlation <= 1.0:
            raise ValidationError("channel_correlation must be in [0, 1]")
        MaskMode.parse(self.mask_mode)

    @property
    def n_bands(self) -> int:
        return len(self.gt_profile)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        return d


@dataclass
class SynthDataset:
    images: np.ndarray  # (n, C, H, W)
    voxels: np.ndarray  # (n, V)
    config: SynthConfig

    def __len__(self):
        return self.images.shape[0]


def _sample_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    # one child per sample so any subset can be regenerated independently
    return np.random.SeedSequence(seed).spawn(n)


def _random_phase(rng: np.random.Generator, shape) -> np.ndarray:
    # phases of the DFT of real white noise are Hermitian-consistent
    spec = np.fft.fft2(rng.standard_normal(shape), axes=(-2, -1))
    return np.exp(1j * np.angle(spec))


def gen_image(seed_seq, shape=(3, 64, 64), exponent: float = 1.0, channel_correlation: float = 0.0) -> np.ndarray:
    """One ``[0, 1]`` image with a power-law amplitude spectrum.

    Each channel mixes a shared phase field with a channel-specific one so the
    channels are correlated like the color planes of a photograph.
    """
    c, h, w = shape
    rng = np.random.default_rng(seed_seq)
    r = np.fft.ifftshift(radial_distance(h, w))
    amp = np.zeros_like(r)
    nz = r > 0
    amp[nz] = r[nz] ** (-float(exponent))

    shared = np.fft.ifft2(amp * _random_phase(rng, (h, w))).real
    own = np.fft.ifft2(amp * _random_phase(rng, (c, h, w)), axes=(-2, -1)).real
    rho = float(channel_correlation)
    x = np.sqrt(rho) * shared[None] + np.sqrt(1.0 - rho) * own
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.full(shape, 0.5)
    return (x - lo) / (hi - lo)


def gen_images(config: SynthConfig) -> np.ndarray:
    """``config.n_samples`` images, reproducible from ``config.rng_seed``."""
    seeds = _sample_seeds(config.rng_seed, config.n_samples)
    return np.stack(
        [gen_image(s, config.shape, config.spectral_exponent, config.channel_correlation) for s in seeds]
    )


def voxel_projection(projection_seed: int, voxel_dim: int, n_pixels: int) -> np.ndarray:
    """Fixed ``(V, C*H*W)`` Gaussian response matrix, unit-variance entries."""
    rng = np.random.default_rng(np.random.SeedSequence([int(projection_seed), 1]))
    return rng.standard_normal((int(voxel_dim), int(n_pixels)))


def profiled_images(images: np.ndarray, masks: BandMaskSet, gt_profile) -> np.ndarray:
    """``sum_i gt_profile[i] * f_i(image)`` for every image."""
    profile = np.asarray(gt_profile, dtype=np.float64)
    if profile.size != masks.n_bands:
        raise ValidationError(
            f"profile has {profile.size} entries but masks have {masks.n_bands} bands"
        )
    out = np.empty(np.shape(images), dtype=np.float64)
    for b, img in enumerate(images):
        out[b] = np.tensordot(profile, band_decompose(img, masks).bands, axes=1)
    return out


def gen_voxels(
    images: np.ndarray,
    masks: BandMaskSet,
    gt_profile,
    projection_seed: int,
    voxel_dim: int,
    noise_sigma: float,
    noise_seed: int | None = None,
) -> np.ndarray:
    """Simulated responses ``P @ flatten(profiled image) + N(0, noise_sigma^2)``.

    Noise is drawn per sample from ``noise_seed`` (default: derived from
    ``projection_seed``), so it does not depend on generation order.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise ValidationError(f"expected (n, C, H, W) images, got {images.shape}")
    if images.shape[2:] != (masks.height, masks.width):
        raise ValidationError("mask grid does not match image size")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")
    n = images.shape[0]
    proj = voxel_projection(projection_seed, voxel_dim, np.prod(images.shape[1:]))
    signal = profiled_images(images, masks, gt_profile).reshape(n, -1) @ proj.T
    if noise_sigma == 0:
        return signal
    base = projection_seed if noise_seed is None else noise_seed
    noise = np.stack(
        [
            np.random.default_rng(s).standard_normal(int(voxel_dim))
            for s in np.random.SeedSequence([int(base), 2]).spawn(n)
        ]
    )
    return signal + noise_sigma * noise


def make_dataset(config: SynthConfig) -> SynthDataset:
    images = gen_images(config)
    masks = make_band_masks(
        config.shape[1], config.shape[2], config.n_bands, config.nu_max, config.mask_mode
    )
    voxels = gen_voxels(
        images, masks, config.gt_profile, config.rng_seed, config.voxel_dim, config.noise_sigma
    )
    return SynthDataset(images, voxels, config)


def recovery_profile(n_bands: int) -> list[float]:
    """Ones on the lowest ``ceil(N/4)`` bands, zeros elsewhere."""
    k = -(-int(n_bands) // 4)
    return [1.0] * k + [0.0] * (int(n_bands) - k)

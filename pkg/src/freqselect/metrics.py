"""Pixel correlation and SSIM between reconstructions and targets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from freqselect.errors import ValidationError

WINDOW = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def pixcorr(a, b) -> float:
    """Pearson correlation over all samples; NaN when either image is constant."""
    a, b = _pair(a, b)
    x = a.ravel() - a.mean()
    y = b.ravel() - b.mean()
    den = np.sqrt((x @ x) * (y @ y))
    if den == 0:
        return float("nan")
    return float(np.clip((x @ y) / den, -1.0, 1.0))


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    g = np.exp(-((np.arange(size) - (size - 1) / 2) ** 2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _gray(x: np.ndarray) -> np.ndarray:
    if x.ndim == 3:
        return x.mean(axis=0)
    if x.ndim == 2:
        return x
    raise ValidationError(f"expected (C, H, W) or (H, W) image, got {x.shape}")


def ssim(a, b, data_range: float = 1.0) -> float:
    """Single-scale SSIM of the channel-mean images, averaged over valid windows."""
    a, b = _pair(a, b)
    a, b = _gray(a), _gray(b)
    if min(a.shape) < WINDOW:
        raise ValidationError(f"image {a.shape} smaller than the {WINDOW}x{WINDOW} window")
    win = gaussian_window()
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2

    def filt(x):
        return convolve2d(x, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    ids: list = field(default_factory=list)
    pixcorr: list = field(default_factory=list)
    ssim: list = field(default_factory=list)

    def add(self, image_id, pc: float, ss: float):
        self.ids.append(image_id)
        self.pixcorr.append(pc)
        self.ssim.append(ss)

    @property
    def mean_pixcorr(self) -> float:
        return float(np.nanmean(self.pixcorr)) if self.pixcorr else float("nan")

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim)) if self.ssim else float("nan")

    def to_csv(self) -> str:
        lines = ["image_id,pixcorr,ssim"]
        for i, p, s in zip(self.ids, self.pixcorr, self.ssim):
            lines.append(f"{i},{float(p)!r},{float(s)!r}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "n_images": len(self.ids),
            "pixcorr_mean": _json_float(self.mean_pixcorr),
            "ssim_mean": _json_float(self.mean_ssim),
        }


def _json_float(x: float):
    return None if not np.isfinite(x) else x


def evaluate(pairs, data_range: float = 1.0) -> MetricReport:
    """Metrics for an iterable of ``(image_id, reconstruction, target)``."""
    report = MetricReport()
    for image_id, recon, target in pairs:
        report.add(image_id, pixcorr(recon, target), ssim(recon, target, data_range))
    return report

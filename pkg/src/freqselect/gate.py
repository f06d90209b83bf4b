"""Learnable pass-through rates and weighted-average fusion of band images.

One raw weight ``w_i`` per band, shared across channels and images. The
fused image is ``sum(alpha_i * f_i) / (sum(alpha_i) + eps)`` with
``alpha = sigmoid(w)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from freqselect.errors import ValidationError
from freqselect.spectral import BandDecomposition

DEFAULT_EPSILON = 1e-10


@dataclass(frozen=True)
class GateParameters:
    w: np.ndarray
    epsilon: float = DEFAULT_EPSILON
    alpha: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        if w.size < 1:
            raise ValidationError("gate needs at least one band")
        if not np.all(np.isfinite(w)):
            raise ValidationError("gate weights must be finite")
        if not (self.epsilon > 0):
            raise ValidationError(f"epsilon must be positive, got {self.epsilon!r}")
        w.setflags(write=False)
        alpha = expit(w)
        alpha.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def initial(cls, n_bands: int, w_init: float = 1.0, epsilon: float = DEFAULT_EPSILON):
        return cls(np.full(int(n_bands), float(w_init)), epsilon)

    @property
    def n_bands(self) -> int:
        return self.w.size

    def replace(self, w) -> "GateParameters":
        return GateParameters(w, self.epsilon)


def pass_through_rates(params: GateParameters) -> np.ndarray:
    """``sigmoid(w)``, elementwise."""
    return expit(params.w)


def _bands(decomp) -> np.ndarray:
    return decomp.bands if isinstance(decomp, BandDecomposition) else np.asarray(decomp)


def _check(bands: np.ndarray, params: GateParameters):
    if bands.shape[0] != params.n_bands:
        raise ValidationError(
            f"decomposition has {bands.shape[0]} bands but gate has {params.n_bands}"
        )


def fuse(decomp: BandDecomposition | np.ndarray, params: GateParameters) -> np.ndarray:
    """Weighted average of the band images.

    ``decomp`` may also be a raw ``(N, ...)`` array, e.g. per-band latents of a
    linear encoder, in which case the same average is taken over axis 0.
    """
    bands = _bands(decomp)
    _check(bands, params)
    alpha = pass_through_rates(params)
    return np.tensordot(alpha, bands, axes=1) / (alpha.sum() + params.epsilon)


def fuse_gradient(
    decomp: BandDecomposition | np.ndarray,
    params: GateParameters,
    upstream: np.ndarray,
) -> np.ndarray:
    """Gradient of ``<upstream, fuse(decomp, params)>`` with respect to ``w``.

    Uses ``d fused / d alpha_k = (f_k - fused) / (sum(alpha) + eps)`` and
    ``d alpha_k / d w_k = alpha_k (1 - alpha_k)``.
    """
    bands = _bands(decomp)
    _check(bands, params)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != bands.shape[1:]:
        raise ValidationError(
            f"upstream shape {upstream.shape} does not match band shape {bands.shape[1:]}"
        )
    alpha = pass_through_rates(params)
    denom = alpha.sum() + params.epsilon
    fused = np.tensordot(alpha, bands, axes=1) / denom
    flat = bands.reshape(bands.shape[0], -1)
    g = upstream.reshape(-1)
    d_alpha = (flat @ g - fused.reshape(-1) @ g) / denom
    return d_alpha * alpha * (1.0 - alpha)

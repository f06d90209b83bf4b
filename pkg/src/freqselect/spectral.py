"""Centered 2D DFT and radial band-pass decomposition.

Images are ``(C, H, W)`` float arrays; 2D ``(H, W)`` inputs are treated as a
single channel. The forward transform is unnormalized and the inverse carries
the ``1/(H*W)`` factor, so ``idft2_shifted(dft2_shifted(x)) == x`` and
``sum|X|^2 / (H*W) == sum|x|^2``.

After the shift the zero frequency sits at integer index ``(H//2, W//2)``.
Ring masks are shared across channels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from freqselect.errors import ValidationError


class MaskMode(str, enum.Enum):
    """How grid points outside ``(nu_0, nu_N]`` are handled.

    ``PARTITION`` puts ``r == 0`` in the first band and every ``r > nu_N``
    in the last band, so the masks tile the grid. ``STRICT`` applies
    ``nu_{i-1} < r <= nu_i`` literally and leaves DC and the corners out.
    """

    PARTITION = "partition"
    STRICT = "strict"

    @classmethod
    def parse(cls, value: "MaskMode | str") -> "MaskMode":
        if isinstance(value, cls):
            return value
        aliases = {
            "partition": cls.PARTITION,
            "partitioncomplete": cls.PARTITION,
            "partition_complete": cls.PARTITION,
            "strict": cls.STRICT,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValidationError(f"unknown mask mode {value!r}") from None


def as_image(image: np.ndarray) -> np.ndarray:
    """Validate and return ``image`` as a float64 ``(C, H, W)`` array."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValidationError(f"expected (C, H, W) or (H, W) image, got shape {arr.shape}")
    if arr.shape[1] < 2 or arr.shape[2] < 2:
        raise ValidationError(f"image must be at least 2x2, got {arr.shape[1:]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("image contains non-finite values")
    return arr


def dft2_shifted(image: np.ndarray) -> np.ndarray:
    """Per-channel unnormalized 2D DFT with the zero frequency moved to the center."""
    x = as_image(image)
    return np.fft.fftshift(np.fft.fft2(x, axes=(-2, -1)), axes=(-2, -1))


def idft2_shifted(spectrum: np.ndarray, return_imag: bool = False):
    """Inverse of :func:`dft2_shifted`, keeping the real part.

    With ``return_imag=True`` also returns the largest discarded imaginary
    magnitude, which should be round-off for Hermitian-symmetric input.
    """
    spec = np.asarray(spectrum, dtype=np.complex128)
    if spec.ndim == 2:
        spec = spec[None]
    if spec.ndim != 3:
        raise ValidationError(f"expected (C, H, W) spectrum, got shape {spec.shape}")
    out = np.fft.ifft2(np.fft.ifftshift(spec, axes=(-2, -1)), axes=(-2, -1))
    if return_imag:
        max_imag = float(np.max(np.abs(out.imag))) if out.size else 0.0
        return out.real.copy(), max_imag
    return out.real.copy()


def radial_distance(h: int, w: int) -> np.ndarray:
    """Distance of every shifted-grid point from the zero-frequency index."""
    u = np.arange(h, dtype=np.float64) - h // 2
    v = np.arange(w, dtype=np.float64) - w // 2
    return np.sqrt(u[:, None] ** 2 + v[None, :] ** 2)


@dataclass(frozen=True)
class BandMaskSet:
    """Ring masks over an ``(h, w)`` centered frequency grid.

    ``band_index[u, v]`` is the zero-based band of each grid point, or ``-1``
    when the point belongs to no band (strict mode only).
    """

    height: int
    width: int
    cutoffs: np.ndarray
    mode: MaskMode
    radius: np.ndarray = field(repr=False)
    band_index: np.ndarray = field(repr=False)

    @property
    def n_bands(self) -> int:
        return len(self.cutoffs) - 1

    @property
    def masks(self) -> np.ndarray:
        """Boolean ``(N, H, W)`` stack of the individual masks."""
        return self.band_index[None] == np.arange(self.n_bands)[:, None, None]

    def mask(self, i: int) -> np.ndarray:
        return self.band_index == i

    def counts(self) -> np.ndarray:
        """Number of grid points in each band."""
        return np.bincount(self.band_index[self.band_index >= 0], minlength=self.n_bands)


def make_band_masks(
    h: int,
    w: int,
    n_bands: int,
    nu_max: float = 32.0,
    mode: MaskMode | str = MaskMode.PARTITION,
) -> BandMaskSet:
    """Build ``n_bands`` rings with cutoffs linearly spaced on ``[0, nu_max]``."""
    if int(n_bands) != n_bands or n_bands < 1:
        raise ValidationError(f"n_bands must be a positive integer, got {n_bands!r}")
    if not np.isfinite(nu_max) or nu_max <= 0:
        raise ValidationError(f"nu_max must be positive, got {nu_max!r}")
    if h < 2 or w < 2:
        raise ValidationError(f"grid must be at least 2x2, got {(h, w)}")
    n_bands = int(n_bands)
    mode = MaskMode.parse(mode)

    cutoffs = np.linspace(0.0, float(nu_max), n_bands + 1)
    r = radial_distance(h, w)
    # searchsorted(side="left") gives i with cutoffs[i-1] < r <= cutoffs[i]
    idx = np.searchsorted(cutoffs, r, side="left") - 1
    if mode is MaskMode.PARTITION:
        idx = np.clip(idx, 0, n_bands - 1)
    else:
        idx[(r <= 0.0) | (r > cutoffs[-1])] = -1
    idx = idx.astype(np.int64)
    for arr in (cutoffs, r, idx):
        arr.setflags(write=False)
    return BandMaskSet(h, w, cutoffs, mode, r, idx)


@dataclass(frozen=True)
class BandDecomposition:
    """Band-limited images ``bands[i]`` of shape ``(C, H, W)``, lowest band first."""

    bands: np.ndarray
    cutoffs: np.ndarray
    mode: MaskMode

    @property
    def n_bands(self) -> int:
        return self.bands.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.bands.shape[1:])

    def total(self) -> np.ndarray:
        return self.bands.sum(axis=0)


def band_decompose(image: np.ndarray, masks: BandMaskSet, return_imag: bool = False):
    """Split ``image`` into one real band-limited image per ring mask.

    With ``return_imag=True`` also returns the largest imaginary magnitude
    dropped across all bands.
    """
    x = as_image(image)
    if x.shape[1:] != (masks.height, masks.width):
        raise ValidationError(
            f"mask grid {(masks.height, masks.width)} does not match image {x.shape[1:]}"
        )
    spec = dft2_shifted(x)
    stack = masks.masks[:, None, :, :] * spec[None]
    bands, max_imag = idft2_shifted(stack.reshape(-1, *x.shape[1:]), return_imag=True)
    bands = bands.reshape(masks.n_bands, *x.shape)
    decomp = BandDecomposition(bands, masks.cutoffs, masks.mode)
    if return_imag:
        return decomp, max_imag
    return decomp


def band_energies(image: np.ndarray, masks: BandMaskSet) -> np.ndarray:
    """Spectral energy ``sum |X|^2 / (H*W)`` falling in each band, summed over channels."""
    x = as_image(image)
    power = (np.abs(dft2_shifted(x)) ** 2).sum(axis=0) / (x.shape[1] * x.shape[2])
    out = np.zeros(masks.n_bands)
    sel = masks.band_index >= 0
    np.add.at(out, masks.band_index[sel], power[sel])
    return out

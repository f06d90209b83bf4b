"""Adaptive radial frequency-band gating of images for fMRI latent decoding.

The package is organised by pipeline stage:

- :mod:`freqselect.spectral`   centered 2D DFT, ring masks, band decomposition
- :mod:`freqselect.gate`       sigmoid pass-through rates and weighted-average fusion
- :mod:`freqselect.encoder`    frozen image -> latent surrogates
- :mod:`freqselect.regression` closed-form ridge regression
- :mod:`freqselect.train`      stage-1 alternating optimisation of the gate
- :mod:`freqselect.diffusion`  forward noising and deterministic reverse loop
- :mod:`freqselect.metrics`    PixCorr and SSIM
- :mod:`freqselect.synth`      1/f images and simulated voxel responses
"""

from freqselect.errors import NumericalError, ValidationError
from freqselect.gate import GateParameters, fuse, fuse_gradient, pass_through_rates
from freqselect.spectral import (
    BandDecomposition,
    BandMaskSet,
    MaskMode,
    band_decompose,
    dft2_shifted,
    idft2_shifted,
    make_band_masks,
)

__version__ = "0.1.0"

__all__ = [
    "BandDecomposition",
    "BandMaskSet",
    "GateParameters",
    "MaskMode",
    "NumericalError",
    "ValidationError",
    "band_decompose",
    "dft2_shifted",
    "fuse",
    "fuse_gradient",
    "idft2_shifted",
    "make_band_masks",
    "pass_through_rates",
]

"""Frozen image -> latent encoders.

A pretrained hierarchical VAE would sit behind :class:`FrozenEncoder`; any
input normalization it needs belongs in its ``encode``. The two surrogates
here consume ``[0, 1]`` images directly and are both linear maps, so they
also expose ``vjp`` (the adjoint) for chaining gradients back to image space.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.fft import dctn, idctn

from freqselect.errors import ValidationError


class FrozenEncoder:
    """Deterministic, stateless map from a ``(C, H, W)`` image to a latent vector."""

    in_shape: tuple[int, int, int]
    latent_dim: int
    linear: bool = False

    def _check(self, image) -> np.ndarray:
        x = np.asarray(image, dtype=np.float64)
        if x.shape != tuple(self.in_shape):
            raise ValidationError(f"encoder expects shape {tuple(self.in_shape)}, got {x.shape}")
        return x

    def encode(self, image: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def encode_batch(self, images: np.ndarray) -> np.ndarray:
        return np.stack([self.encode(x) for x in images])

    def vjp(self, cotangent: np.ndarray) -> np.ndarray:
        """Pull a latent-space cotangent back to an image-space cotangent."""
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError


def encode(encoder: FrozenEncoder, image: np.ndarray) -> np.ndarray:
    return encoder.encode(image)


class LinearProjectionEncoder(FrozenEncoder):
    linear = True

    def __init__(self, matrix: np.ndarray, in_shape, seed: int | None = None):
        matrix = np.array(matrix, dtype=np.float64)
        in_shape = tuple(int(s) for s in in_shape)
        if matrix.ndim != 2 or matrix.shape[1] != int(np.prod(in_shape)):
            raise ValidationError(
                f"projection of shape {matrix.shape} does not fit input {in_shape}"
            )
        matrix.setflags(write=False)
        self.matrix = matrix
        self.in_shape = in_shape
        self.latent_dim = matrix.shape[0]
        self.seed = seed

    def encode(self, image):
        return self.matrix @ self._check(image).reshape(-1)

    def encode_batch(self, images):
        images = np.asarray(images, dtype=np.float64)
        return images.reshape(images.shape[0], -1) @ self.matrix.T

    def vjp(self, cotangent):
        return (self.matrix.T @ np.asarray(cotangent, dtype=np.float64)).reshape(self.in_shape)

    def config(self):
        return {"kind": "linear", "seed": self.seed, "latent_dim": self.latent_dim}


def make_linear_projection_encoder(seed: int, in_shape, latent_dim: int) -> LinearProjectionEncoder:
    """Seeded Gaussian projection with rows scaled by ``1/sqrt(C*H*W)``."""
    if int(latent_dim) != latent_dim or latent_dim < 1:
        raise ValidationError(f"latent_dim must be a positive integer, got {latent_dim!r}")
    n = int(np.prod(in_shape))
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((int(latent_dim), n)) / np.sqrt(n)
    return LinearProjectionEncoder(matrix, in_shape, seed=seed)


def zigzag_order(block: int) -> np.ndarray:
    """Flat indices of a ``block x block`` grid in JPEG zigzag order."""
    idx = [(i, j) for i in range(block) for j in range(block)]
    # odd anti-diagonals run top-right to bottom-left, even ones the reverse
    idx.sort(key=lambda ij: (ij[0] + ij[1], ij[0] if (ij[0] + ij[1]) % 2 else ij[1]))
    return np.array([i * block + j for i, j in idx])


class BlockDCTEncoder(FrozenEncoder):
    """Orthonormal 2D DCT-II per block, lowest ``keep`` zigzag coefficients retained.

    Latent layout is channel-major, then blocks in row-major order, then
    coefficients in zigzag order.
    """

    linear = True

    def __init__(self, in_shape, block: int = 8, keep: int = 6):
        in_shape = tuple(int(s) for s in in_shape)
        if len(in_shape) != 3:
            raise ValidationError(f"in_shape must be (C, H, W), got {in_shape}")
        c, h, w = in_shape
        if block < 1 or h % block or w % block:
            raise ValidationError(f"block {block} must divide image size {(h, w)}")
        if not 1 <= keep <= block * block:
            raise ValidationError(f"keep must be in [1, {block * block}], got {keep}")
        self.in_shape = in_shape
        self.block = int(block)
        self.keep = int(keep)
        self.n_blocks = (h // block) * (w // block)
        self.latent_dim = c * self.n_blocks * self.keep

    @cached_property
    def _order(self) -> np.ndarray:
        return zigzag_order(self.block)[: self.keep]

    def _to_blocks(self, x: np.ndarray) -> np.ndarray:
        c, h, w = self.in_shape
        b = self.block
        # (C, H/b, b, W/b, b) -> (C, H/b, W/b, b, b)
        return x.reshape(c, h // b, b, w // b, b).transpose(0, 1, 3, 2, 4)

    def _from_blocks(self, blocks: np.ndarray) -> np.ndarray:
        c, h, w = self.in_shape
        return blocks.transpose(0, 1, 3, 2, 4).reshape(c, h, w)

    def encode(self, image):
        blocks = self._to_blocks(self._check(image))
        coeffs = dctn(blocks, type=2, axes=(-2, -1), norm="ortho")
        coeffs = coeffs.reshape(*coeffs.shape[:3], -1)[..., self._order]
        return coeffs.reshape(-1)

    def vjp(self, cotangent):
        c, h, w = self.in_shape
        b = self.block
        full = np.zeros((c, h // b, w // b, b * b))
        full[..., self._order] = np.asarray(cotangent, dtype=np.float64).reshape(
            c, h // b, w // b, self.keep
        )
        blocks = idctn(full.reshape(c, h // b, w // b, b, b), type=2, axes=(-2, -1), norm="ortho")
        return self._from_blocks(blocks)

    def config(self):
        return {"kind": "blockdct", "block": self.block, "keep": self.keep}


def make_block_dct_encoder(in_shape, block: int = 8, keep: int = 6) -> BlockDCTEncoder:
    return BlockDCTEncoder(in_shape, block, keep)


def encoder_from_config(cfg: dict, in_shape) -> FrozenEncoder:
    """Build an encoder from ``{"kind": "linear"|"blockdct", ...}``."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind == "linear":
        allowed = {"seed", "latent_dim"}
        _reject_unknown(cfg, allowed, "encoder")
        return make_linear_projection_encoder(
            int(cfg.get("seed", 0)), in_shape, int(cfg.get("latent_dim", 64))
        )
    if kind == "blockdct":
        _reject_unknown(cfg, {"block", "keep"}, "encoder")
        return make_block_dct_encoder(in_shape, int(cfg.get("block", 8)), int(cfg.get("keep", 6)))
    raise ValidationError(f"unknown encoder kind {kind!r}")


def _reject_unknown(cfg: dict, allowed: set, where: str):
    extra = set(cfg) - allowed
    if extra:
        raise ValidationError(f"unknown {where} keys: {sorted(extra)}")

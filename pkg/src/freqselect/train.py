"""Stage-1 training: gate the images, encode, regress voxels to latents, update the gate.

Each epoch:

1. fuse the band images with the current gate and encode them (``z_true``);
2. every ``ridge_refresh_every`` epochs refit the ridge map voxels -> ``z_true``;
3. with the ridge map frozen, step ``w`` down the gradient of the latent MSE.

Both surrogate encoders are linear, so ``encode(fuse(bands)) ==
fuse(encode(bands))``. Band latents are therefore computed once per image and
the per-epoch forward pass works in latent space.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from freqselect.encoder import FrozenEncoder
from freqselect.errors import NumericalError, ValidationError
from freqselect.gate import GateParameters, fuse, pass_through_rates
from freqselect.regression import RidgeModel, ridge_fit, ridge_predict
from freqselect.spectral import BandMaskSet, MaskMode, band_decompose, make_band_masks

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6


@dataclass
class Stage1Config:
    n_bands: int = 16
    nu_max: float = 32.0
    mask_mode: str = "partition"
    epsilon: float = 1e-10
    w_init: float = 1.0
    learning_rate: float = 0.05
    optimizer: str = "adam"
    epochs: int = 300
    batch_size: int | None = None
    ridge_lambda: float = 1.0
    ridge_refresh_every: int = 1
    heldout_fraction: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_bands", "epochs", "ridge_refresh_every"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.batch_size is not None and int(self.batch_size) < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValidationError("learning_rate must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if not self.ridge_lambda >= 0:
            raise ValidationError("ridge_lambda must be >= 0")
        if not 0.0 <= self.heldout_fraction < 1.0:
            raise ValidationError("heldout_fraction must be in [0, 1)")
        MaskMode.parse(self.mask_mode)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    loss_train: float
    loss_heldout: float
    w: np.ndarray
    alpha: np.ndarray


@dataclass
class TrajectoryLog:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, rec: EpochRecord):
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValidationError("epoch indices must increase")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i) -> EpochRecord:
        return self.records[i]

    @property
    def w(self) -> np.ndarray:
        return np.array([r.w for r in self.records])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([r.alpha for r in self.records])

    @property
    def loss_train(self) -> np.ndarray:
        return np.array([r.loss_train for r in self.records])

    @property
    def loss_heldout(self) -> np.ndarray:
        return np.array([r.loss_heldout for r in self.records])

    def header(self) -> list[str]:
        n = self.records[0].w.size if self.records else 0
        return (
            ["epoch", "loss_train", "loss_heldout"]
            + [f"w_{i}" for i in range(n)]
            + [f"alpha_{i}" for i in range(n)]
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for r in self.records:
            writer.writerow(
                [r.epoch, repr(r.loss_train), repr(r.loss_heldout)]
                + [repr(float(v)) for v in r.w]
                + [repr(float(v)) for v in r.alpha]
            )
        return buf.getvalue()


def stage1_loss(z_true, z_pred) -> float:
    """Batch mean of squared Euclidean latent errors."""
    z_true = np.atleast_2d(np.asarray(z_true, dtype=np.float64))
    z_pred = np.atleast_2d(np.asarray(z_pred, dtype=np.float64))
    if z_true.shape != z_pred.shape:
        raise ValidationError(f"batch shapes differ: {z_true.shape} vs {z_pred.shape}")
    if z_true.shape[0] == 0:
        raise ValidationError("empty batch")
    return float(np.sum((z_true - z_pred) ** 2) / z_true.shape[0])


def band_latents(images: np.ndarray, encoder: FrozenEncoder, masks: BandMaskSet) -> np.ndarray:
    """``(n, N, D)`` encoder outputs of every band image of every input."""
    if not encoder.linear:
        raise ValidationError("band-latent caching requires a linear encoder")
    out = np.empty((len(images), masks.n_bands, encoder.latent_dim))
    for b, img in enumerate(images):
        out[b] = encoder.encode_batch(band_decompose(img, masks).bands)
    return out


def gated_latents(latents: np.ndarray, gate: GateParameters) -> np.ndarray:
    """``z_true`` for every sample from cached ``(n, N, D)`` band latents."""
    return fuse(np.moveaxis(latents, 1, 0), gate)


def loss_and_gradient(
    latents: np.ndarray, voxels: np.ndarray, gate: GateParameters, model: RidgeModel
) -> tuple[float, np.ndarray]:
    """Latent MSE and its gradient in ``w`` with the ridge map held fixed."""
    alpha = pass_through_rates(gate)
    denom = alpha.sum() + gate.epsilon
    z_true = gated_latents(latents, gate)
    resid = z_true - ridge_predict(model, voxels)
    n = latents.shape[0]
    loss = float(np.sum(resid**2) / n)
    # d loss / d z_true = 2 r / n, contracted with (z_k - z_true) / denom
    upstream = 2.0 * resid / n
    d_alpha = (np.einsum("bkd,bd->k", latents, upstream) - np.sum(z_true * upstream)) / denom
    return loss, d_alpha * alpha * (1.0 - alpha)


def stage1_gradient_images(
    images: np.ndarray,
    voxels: np.ndarray,
    encoder: FrozenEncoder,
    masks: BandMaskSet,
    gate: GateParameters,
    model: RidgeModel,
) -> tuple[float, np.ndarray]:
    """Same quantity as :func:`loss_and_gradient`, via image-space cotangents.

    Slower, but follows the literal pipeline: fuse in image space, encode,
    then pull the latent cotangent back through ``encoder.vjp`` and
    :func:`freqselect.gate.fuse_gradient`.
    """
    from freqselect.gate import fuse_gradient

    n = len(images)
    z_pred = ridge_predict(model, voxels)
    loss = 0.0
    grad = np.zeros(gate.n_bands)
    for b in range(n):
        decomp = band_decompose(images[b], masks)
        z = encoder.encode(fuse(decomp, gate))
        r = z - z_pred[b]
        loss += float(r @ r) / n
        grad += fuse_gradient(decomp, gate, encoder.vjp(2.0 * r / n))
    return loss, grad


class _Adam:
    def __init__(self, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, w, g):
        if self.m is None:
            self.m = np.zeros_like(w)
            self.v = np.zeros_like(w)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return w - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, w, g):
        return w - self.lr * g


def split_indices(n: int, heldout_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed split: the last ``heldout_fraction`` of samples are held out."""
    n_held = int(round(n * heldout_fraction))
    if n - n_held < 1:
        raise ValidationError("no training samples left after the held-out split")
    return np.arange(n - n_held), np.arange(n - n_held, n)


def train_stage1(
    images: np.ndarray,
    voxels: np.ndarray,
    encoder: FrozenEncoder,
    config: Stage1Config,
    latents: np.ndarray | None = None,
) -> tuple[GateParameters, RidgeModel, TrajectoryLog]:
    """Alternate closed-form ridge refits with gradient steps on the gate.

    ``latents`` may carry precomputed :func:`band_latents` to skip the
    decomposition pass.
    """
    images = np.asarray(images, dtype=np.float64)
    voxels = np.asarray(voxels, dtype=np.float64)
    if images.ndim != 4 or len(images) == 0:
        raise ValidationError(f"expected non-empty (n, C, H, W) images, got {images.shape}")
    if voxels.ndim != 2 or len(voxels) != len(images):
        raise ValidationError("voxels must be (n, V) with one row per image")

    masks = make_band_masks(
        images.shape[2], images.shape[3], config.n_bands, config.nu_max, config.mask_mode
    )
    if latents is None:
        latents = band_latents(images, encoder, masks)
    train_idx, held_idx = split_indices(len(images), config.heldout_fraction)
    lat_tr, vox_tr = latents[train_idx], voxels[train_idx]
    lat_ho, vox_ho = latents[held_idx], voxels[held_idx]

    gate = GateParameters.initial(config.n_bands, config.w_init, config.epsilon)
    opt = _Adam(config.learning_rate) if config.optimizer == "adam" else _SGD(config.learning_rate)
    rng = np.random.default_rng(config.rng_seed)
    batch = config.batch_size
    trajectory = TrajectoryLog()
    model = None
    initial_loss = None

    for epoch in range(config.epochs):
        if model is None or epoch % config.ridge_refresh_every == 0:
            model = ridge_fit(vox_tr, gated_latents(lat_tr, gate), config.ridge_lambda)

        loss, grad = loss_and_gradient(lat_tr, vox_tr, gate, model)
        heldout = (
            stage1_loss(gated_latents(lat_ho, gate), ridge_predict(model, vox_ho))
            if len(held_idx)
            else float("nan")
        )
        if initial_loss is None:
            initial_loss = loss
        if not np.isfinite(loss) or loss > DIVERGENCE_FACTOR * max(initial_loss, 1e-300):
            raise NumericalError(
                f"training diverged at epoch {epoch}: loss {loss:.6g} vs initial {initial_loss:.6g}"
            )
        trajectory.append(EpochRecord(epoch, loss, heldout, gate.w.copy(), gate.alpha.copy()))

        if batch is None or batch >= len(train_idx):
            w = opt.step(gate.w, grad)
        else:
            w = gate.w
            for chunk in np.array_split(rng.permutation(len(train_idx)), -(-len(train_idx) // batch)):
                _, g = loss_and_gradient(lat_tr[chunk], vox_tr[chunk], gate.replace(w), model)
                w = opt.step(w, g)
        gate = gate.replace(w)
        log.debug("epoch %d loss %.6g heldout %.6g", epoch, loss, heldout)

    return gate, model, trajectory


def infer_stage1(voxels, model: RidgeModel) -> np.ndarray:
    """Predicted latent(s) for new voxel vectors."""
    return ridge_predict(model, voxels)

"""File formats: PGM/PPM images, raw float32 tensors with JSON sidecars, gate and ridge files.

Every writer goes through :func:`atomic_write` (temp file in the target
directory, then ``os.replace``) so readers never see a partial file.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from freqselect.errors import ValidationError
from freqselect.gate import GateParameters
from freqselect.regression import RidgeModel
from freqselect.spectral import MaskMode


def atomic_write(path, data: bytes | str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dump_json(obj))


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


# -- raw tensors ------------------------------------------------------------

def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_tensor(path, array, **meta):
    """Little-endian float32 payload plus ``{dtype, shape, **meta}`` JSON sidecar."""
    array = np.asarray(array, dtype="<f4")
    atomic_write(path, array.tobytes(order="C"))
    write_json(sidecar_path(path), {"dtype": "float32-le", "shape": list(array.shape), **meta})


def read_tensor(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = read_json(sidecar_path(path))
    if meta.get("dtype", "float32-le") != "float32-le":
        raise ValidationError(f"{path}: unsupported dtype {meta.get('dtype')!r}")
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    shape = tuple(int(s) for s in meta.get("shape", [raw.size]))
    if int(np.prod(shape)) != raw.size:
        raise ValidationError(f"{path}: {raw.size} values do not fill shape {shape}")
    return raw.reshape(shape).astype(np.float64), meta


# -- PGM / PPM --------------------------------------------------------------

def to_bytes(image) -> np.ndarray:
    """Map ``[0, 1]`` floats to ``uint8``, clipping out-of-range values."""
    return np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pnm(path, image):
    """Binary PGM for one channel (or 2-D input), PPM for three channels."""
    x = np.asarray(image)
    if x.ndim == 3 and x.shape[0] == 1:
        x = x[0]
    if x.ndim == 2:
        magic, pixels = b"P5", to_bytes(x)
    elif x.ndim == 3 and x.shape[0] == 3:
        magic, pixels = b"P6", to_bytes(x).transpose(1, 2, 0)
    else:
        raise ValidationError(f"cannot store image of shape {x.shape} as PGM/PPM")
    h, w = pixels.shape[:2]
    atomic_write(path, magic + f"\n{w} {h}\n255\n".encode() + pixels.tobytes())


def write_mask(path, mask):
    write_pnm(path, np.asarray(mask, dtype=np.float64))


def _pnm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    return tokens, pos + 1


def read_pnm(path) -> np.ndarray:
    """Read binary PGM/PPM into a ``(C, H, W)`` array scaled to ``[0, 1]``."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    data = path.read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ValidationError(f"{path}: not a binary PGM/PPM file")
    try:
        (w, h, maxval), pos = _pnm_tokens(data, 3)
    except ValueError:
        raise ValidationError(f"{path}: malformed header") from None
    c = 1 if magic == b"P5" else 3
    dtype = ">u2" if maxval > 255 else "u1"
    pix = np.frombuffer(data, dtype=dtype, count=w * h * c, offset=pos)
    img = pix.reshape(h, w, c).transpose(2, 0, 1).astype(np.float64) / maxval
    return img


def read_image(path) -> np.ndarray:
    """Load a PGM/PPM file or a raw ``.f32`` tensor as a ``(C, H, W)`` image."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        return read_pnm(path)
    img, _ = read_tensor(path)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3:
        raise ValidationError(f"{path}: expected an image tensor, got shape {img.shape}")
    return img


# -- gate / ridge -----------------------------------------------------------

def gate_to_dict(gate: GateParameters, cutoffs, mask_mode) -> dict:
    return {
        "n_bands": gate.n_bands,
        "cutoffs": [float(c) for c in cutoffs],
        "w": [float(v) for v in gate.w],
        "alpha": [float(v) for v in gate.alpha],
        "epsilon": gate.epsilon,
        "mask_mode": MaskMode.parse(mask_mode).value,
    }


def write_gate(path, gate: GateParameters, cutoffs, mask_mode):
    write_json(path, gate_to_dict(gate, cutoffs, mask_mode))


def read_gate(path) -> tuple[GateParameters, dict]:
    d = read_json(path)
    missing = {"n_bands", "cutoffs", "w", "epsilon", "mask_mode"} - set(d)
    if missing:
        raise ValidationError(f"{path}: gate file missing {sorted(missing)}")
    gate = GateParameters(d["w"], float(d["epsilon"]))
    if gate.n_bands != d["n_bands"] or len(d["cutoffs"]) != gate.n_bands + 1:
        raise ValidationError(f"{path}: inconsistent band count")
    MaskMode.parse(d["mask_mode"])
    return gate, d


def alpha_csv(gate: GateParameters, cutoffs) -> str:
    lines = ["band,cutoff_low,cutoff_high,w,alpha"]
    for i, (w, a) in enumerate(zip(gate.w, gate.alpha)):
        lines.append(f"{i},{float(cutoffs[i])!r},{float(cutoffs[i + 1])!r},{float(w)!r},{float(a)!r}")
    return "\n".join(lines) + "\n"


def write_ridge(path, model: RidgeModel):
    """Weights ``(V, D)`` then the intercept row, as one ``(V + 1, D)`` float32 block."""
    stacked = np.vstack([model.weights, model.intercept[None]])
    write_tensor(path, stacked, V=model.n_voxels, D=model.latent_dim, **{"lambda": model.lam})


def read_ridge(path) -> RidgeModel:
    arr, meta = read_tensor(path)
    try:
        v, d = int(meta["V"]), int(meta["D"])
    except KeyError:
        raise ValidationError(f"{path}: ridge sidecar needs V and D") from None
    if arr.shape != (v + 1, d):
        raise ValidationError(f"{path}: expected shape {(v + 1, d)}, got {arr.shape}")
    return RidgeModel(arr[:v], arr[v], float(meta.get("lambda", 0.0)))


def write_decomposition(out_dir, decomp, masks):
    """Per-band PPM/PGM previews, PGM masks, and the exact bands as float32."""
    out_dir = Path(out_dir)
    c, h, w = decomp.shape
    for i in range(decomp.n_bands):
        ext = "ppm" if c == 3 else "pgm"
        if c in (1, 3):
            write_pnm(out_dir / f"band_{i:02d}.{ext}", decomp.bands[i])
        write_mask(out_dir / f"mask_{i:02d}.pgm", masks.mask(i))
    write_tensor(
        out_dir / "bands.f32",
        decomp.bands,
        channels=c,
        height=h,
        width=w,
        n_bands=decomp.n_bands,
        cutoffs=[float(x) for x in decomp.cutoffs],
        mask_mode=decomp.mode.value,
    )


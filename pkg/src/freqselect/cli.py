"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 numerical failure. Failures
print one ``error: <kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from freqselect import io
from freqselect.config import ExperimentConfig
from freqselect.encoder import encoder_from_config
from freqselect.errors import NumericalError, ValidationError
from freqselect.metrics import evaluate
from freqselect.spectral import band_decompose, make_band_masks
from freqselect.synth import SynthConfig, SynthDataset, make_dataset
from freqselect.train import infer_stage1, train_stage1

log = logging.getLogger("freqselect")


def cmd_synth_data(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    ds = make_dataset(cfg.synth)
    out = Path(args.out)
    io.write_tensor(out / "images.f32", ds.images)
    io.write_tensor(out / "voxels.f32", ds.voxels)
    io.write_json(
        out / "manifest.json",
        {"synth": cfg.synth.to_dict(), "images": "images.f32", "voxels": "voxels.f32"},
    )
    log.info("wrote %d samples to %s", len(ds), out)
    return 0


def load_dataset(path) -> SynthDataset:
    path = Path(path)
    manifest = io.read_json(path / "manifest.json")
    images, _ = io.read_tensor(path / manifest.get("images", "images.f32"))
    voxels, _ = io.read_tensor(path / manifest.get("voxels", "voxels.f32"))
    if images.ndim != 4 or voxels.ndim != 2 or len(images) != len(voxels):
        raise ValidationError(f"{path}: images {images.shape} and voxels {voxels.shape} do not pair up")
    synth = manifest.get("synth") or {}
    return SynthDataset(images, voxels, SynthConfig(**synth) if synth else None)


def cmd_decompose(args) -> int:
    image = io.read_image(args.image)
    masks = make_band_masks(image.shape[1], image.shape[2], args.bands, args.nu_max, args.mode)
    decomp = band_decompose(image, masks)
    io.write_decomposition(args.out, decomp, masks)
    return 0


def cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    ds = load_dataset(cfg.dataset) if cfg.dataset is not None else make_dataset(cfg.synth)
    encoder = encoder_from_config(cfg.encoder, ds.images.shape[1:])
    gate, model, traj = train_stage1(ds.images, ds.voxels, encoder, cfg.stage1)

    out = Path(args.out)
    s1 = cfg.stage1
    cutoffs = make_band_masks(
        ds.images.shape[2], ds.images.shape[3], s1.n_bands, s1.nu_max, s1.mask_mode
    ).cutoffs
    io.write_gate(out / "gate.json", gate, cutoffs, s1.mask_mode)
    io.write_ridge(out / "ridge.f32", model)
    io.atomic_write(out / "trajectory.csv", traj.to_csv())
    last = traj[-1]
    io.write_json(
        out / "manifest.json",
        {
            "config": cfg.to_dict(),
            "n_samples": len(ds.images),
            "epochs": len(traj),
            "final": {
                "loss_train": last.loss_train,
                "loss_heldout": last.loss_heldout,
                "w": [float(v) for v in gate.w],
                "alpha": [float(v) for v in gate.alpha],
            },
            "files": {"gate": "gate.json", "ridge": "ridge.f32", "trajectory": "trajectory.csv"},
        },
    )
    log.info("final alpha %s", np.array2string(gate.alpha, precision=3))
    return 0


def cmd_infer(args) -> int:
    gate, _ = io.read_gate(args.gate)
    model = io.read_ridge(args.ridge)
    voxels, _ = io.read_tensor(args.voxels)
    z = infer_stage1(voxels, model)
    io.write_tensor(args.out, z, gate=str(args.gate), ridge=str(args.ridge))
    return 0


def cmd_evaluate(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = io.read_json(manifest_path)
    extra = set(manifest) - {"pairs", "data_range"}
    if extra or "pairs" not in manifest:
        raise ValidationError(f"evaluate manifest needs 'pairs' (unknown keys: {sorted(extra)})")
    base = manifest_path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    pairs = []
    for k, entry in enumerate(manifest["pairs"]):
        try:
            recon, target = entry["reconstruction"], entry["target"]
        except (KeyError, TypeError):
            raise ValidationError(f"pair {k} needs 'reconstruction' and 'target'") from None
        pairs.append((entry.get("id", k), io.read_image(resolve(recon)), io.read_image(resolve(target))))
    report = evaluate(pairs, float(manifest.get("data_range", 1.0)))
    out = Path(args.out)
    io.atomic_write(out / "metrics.csv", report.to_csv())
    io.write_json(out / "summary.json", report.summary())
    return 0


def cmd_export_weights(args) -> int:
    gate, meta = io.read_gate(args.gate)
    io.atomic_write(args.out, io.alpha_csv(gate, meta["cutoffs"]))
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors are validation failures: exit 1 with a single line
    def error(self, message):
        _fail("validation", message)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="freqselect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate a synthetic image/voxel dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("decompose", help="split an image into radial frequency bands")
    p.add_argument("--image", required=True)
    p.add_argument("--bands", type=int, required=True)
    p.add_argument("--nu-max", type=float, default=32.0)
    p.add_argument("--mode", choices=["partition", "strict"], default="partition")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="stage-1 gate + ridge training")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict latents from voxel vectors")
    p.add_argument("--gate", required=True)
    p.add_argument("--ridge", required=True)
    p.add_argument("--voxels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="PixCorr and SSIM over image pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-weights", help="write per-band pass-through rates as CSV")
    p.add_argument("--gate", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_weights)
    return parser


def _fail(kind: str, exc) -> None:
    msg = " ".join(str(exc).split())
    print(f"error: {kind}: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        _fail("validation", exc)
        return 1
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        _fail("numerical", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

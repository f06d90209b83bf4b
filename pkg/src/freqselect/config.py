"""Experiment configuration: one JSON document, validated before any work starts.

::

    {
      "synth":   {SynthConfig fields},
      "stage1":  {Stage1Config fields},
      "encoder": {"kind": "linear", "seed": 0, "latent_dim": 64}
                 | {"kind": "blockdct", "block": 8, "keep": 6},
      "metrics": {"data_range": 1.0},
      "dataset": "path/to/synth-data/output"   (optional)
    }

Unknown keys at any level are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from freqselect.encoder import encoder_from_config
from freqselect.errors import ValidationError
from freqselect.io import read_json
from freqselect.synth import SynthConfig
from freqselect.train import Stage1Config

DEFAULT_ENCODER = {"kind": "linear", "seed": 0, "latent_dim": 64}
TOP_LEVEL = {"synth", "stage1", "encoder", "metrics", "dataset"}


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError(f"'{where}' must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(data) - names
    if extra:
        raise ValidationError(f"unknown keys in '{where}': {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ValidationError(f"bad '{where}' section: {exc}") from None


@dataclass
class ExperimentConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    stage1: Stage1Config = field(default_factory=Stage1Config)
    encoder: dict = field(default_factory=lambda: dict(DEFAULT_ENCODER))
    data_range: float = 1.0
    dataset: Path | None = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        extra = set(d) - TOP_LEVEL
        if extra:
            raise ValidationError(f"unknown top-level config keys: {sorted(extra)}")
        metrics = d.get("metrics") or {}
        if set(metrics) - {"data_range"}:
            raise ValidationError(f"unknown keys in 'metrics': {sorted(set(metrics) - {'data_range'})}")
        cfg = cls(
            synth=_build(SynthConfig, d.get("synth"), "synth"),
            stage1=_build(Stage1Config, d.get("stage1"), "stage1"),
            encoder=dict(d.get("encoder") or DEFAULT_ENCODER),
            data_range=float(metrics.get("data_range", 1.0)),
        )
        if d.get("dataset") is not None:
            p = Path(d["dataset"])
            cfg.dataset = p if p.is_absolute() or base_dir is None else base_dir / p
        # fail early on a bad encoder spec
        encoder_from_config(cfg.encoder, cfg.synth.shape)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(read_json(path), base_dir=path.parent)

    def to_dict(self) -> dict:
        d = {
            "synth": self.synth.to_dict(),
            "stage1": self.stage1.to_dict(),
            "encoder": dict(self.encoder),
            "metrics": {"data_range": self.data_range},
        }
        if self.dataset is not None:
            d["dataset"] = str(self.dataset)
        return d

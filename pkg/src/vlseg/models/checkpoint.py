"""Single-file model checkpoints: config + parameter map + format version."""
from __future__ import annotations

from pathlib import Path

import torch
import torch.nn as nn

from .unet import CNNConfig, build_baseline
from .vlsm import VLSM, VLSMConfig

FORMAT = "vlseg-checkpoint"
VERSION = 1


def model_kind(model: nn.Module) -> str:
    return "vlsm" if isinstance(model, VLSM) else "cnn"


def save_checkpoint(model: nn.Module, path: str | Path, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model_kind(model),
        "config": model.config.to_dict(),
        "state_dict": model.state_dict(),
        **extra,
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> dict:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} file")
    if payload.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    return payload


def model_from_config(kind: str, config: dict) -> nn.Module:
    if kind == "vlsm":
        model = VLSM(VLSMConfig.from_dict(config))
        model.apply_freeze()
        return model
    if kind == "cnn":
        return build_baseline(CNNConfig(**config))
    raise ValueError(f"unknown model kind {kind!r}")


def load_model(path: str | Path) -> nn.Module:
    payload = load_checkpoint(path)
    model = model_from_config(payload["kind"], payload["config"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model

"""Weight providers: seeded toy initialisation or pretrained component checkpoints.

A checkpoint manifest is JSON of the form::

    {"version": 1,
     "components": {
        "clip/text_encoder": {"file": "clip_text.pt", "dims": {...}, "sha256": "..."},
        "clipseg/decoder":   {"file": "clipseg_decoder.pt", "dims": {...}, "sha256": "..."}}}

Component names are ``<backbone>/text_encoder``, ``<backbone>/vision_encoder``
and ``<decoder source>/decoder``; file paths are relative to the manifest.
"""
from __future__ import annotations

import hashlib
import json
import zlib
from pathlib import Path

import torch
import torch.nn as nn


def derive_seed(seed: int, name: str) -> int:
    return zlib.crc32(f"{seed}:{name}".encode())


def component_dims(name: str, config) -> dict:
    kind = name.split("/")[-1]
    c = config
    if kind == "text_encoder":
        return dict(vocab_size=c.vocab_size, context_length=c.context_length, text_dim=c.text_dim,
                    text_layers=c.text_layers, joint_dim=c.joint_dim)
    if kind == "vision_encoder":
        return dict(input_side=c.input_side, patch=c.patch, vision_dim=c.vision_dim,
                    vision_layers=c.vision_layers, extract_layers=list(c.extract_layers))
    if kind == "decoder":
        return dict(conditioning=c.conditioning, decoder_dim=c.decoder_dim, vision_dim=c.vision_dim,
                    joint_dim=c.joint_dim, text_dim=c.text_dim, n_skips=len(c.extract_layers))
    raise KeyError(f"unknown component kind {kind!r}")


class ToyProvider:
    """Deterministic random weights: each component is seeded from (seed, name)."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def initialize(self, module: nn.Module, name: str, config=None) -> None:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(derive_seed(self.seed, name))
            # children first so parents can override (e.g. zero-initialised projections)
            for m in reversed(list(module.modules())):
                reset = getattr(m, "reset_parameters", None)
                if callable(reset):
                    reset()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class CheckpointProvider:
    """Loads pretrained component weights listed in a manifest."""

    def __init__(self, manifest: str | Path):
        self.path = Path(manifest)
        data = json.loads(self.path.read_text())
        if data.get("version") != 1:
            raise ValueError(f"unsupported manifest version {data.get('version')!r}")
        self.components: dict[str, dict] = data["components"]

    def initialize(self, module: nn.Module, name: str, config) -> None:
        entry = self.components.get(name)
        if entry is None:
            raise KeyError(f"missing checkpoint for component {name!r} in {self.path}")
        expected = component_dims(name, config)
        if entry.get("dims") and entry["dims"] != expected:
            raise ValueError(f"component {name!r}: checkpoint dims {entry['dims']} != model dims {expected}")
        file = self.path.parent / entry["file"]
        if not file.exists():
            raise FileNotFoundError(f"missing checkpoint for component {name!r}: {file}")
        if entry.get("sha256") and _sha256(file) != entry["sha256"]:
            raise ValueError(f"component {name!r}: hash mismatch for {file}")
        state = torch.load(file, map_location="cpu", weights_only=True)
        module.load_state_dict(state)


def export_components(model, directory: str | Path, names: dict[str, str] | None = None) -> Path:
    """Write the model's components and a manifest that CheckpointProvider can read.

    ``names`` maps component attribute ('text_encoder', 'vision_encoder',
    'decoder') to manifest name; defaults follow the model's variant.
    """
    from .vlsm import BACKBONE, DECODER_SOURCE

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    variant = model.config.variant
    if names is None:
        names = {
            "text_encoder": f"{BACKBONE[variant]}/text_encoder",
            "vision_encoder": f"{BACKBONE[variant]}/vision_encoder",
            "decoder": f"{DECODER_SOURCE[variant] or variant}/decoder",
        }
    manifest_path = directory / "manifest.json"
    components = {}
    if manifest_path.exists():
        components = json.loads(manifest_path.read_text())["components"]
    for attr, name in names.items():
        file = directory / (name.replace("/", "__") + ".pt")
        torch.save(model.component(attr).state_dict(), file)
        components[name] = {"file": file.name, "dims": component_dims(name, model.config), "sha256": _sha256(file)}
    manifest_path.write_text(json.dumps({"version": 1, "components": components}, indent=2))
    return manifest_path

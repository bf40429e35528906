"""Small synthetic datasets for smoke tests and conditioning probes."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from ..prompts import AttributeSet, PromptType, Provenance, build_record, class_attributes
from ..prompts.sidecar import SidecarEntry
from .datasets import SampleTriplet

QUADRANTS = ("top left", "top right", "bottom left", "bottom right")
_FIXED = SidecarEntry(AttributeSet({"color": "pink", "shape": "round"}, Provenance.SIDECAR))


def _background(rng: np.random.Generator, side: int) -> np.ndarray:
    base = rng.uniform(60, 110, size=3)
    noise = rng.normal(0, 8, size=(side, side, 3))
    return base + noise


def _paint(image: np.ndarray, mask: np.ndarray, rng: np.random.Generator) -> None:
    colour = np.array([220.0, 120.0, 140.0]) + rng.normal(0, 10, size=3)
    image[mask.astype(bool)] = colour + rng.normal(0, 6, size=(int(mask.sum()), 3))


def _triplet(image, mask, sample_id, dataset, ptype, seed, class_name="polyp") -> SampleTriplet:
    attrs = class_attributes(mask, class_name, _FIXED)
    rec = build_record("endoscopy", ptype, sample_id, class_name, attrs, seed)
    return SampleTriplet(
        sample_id, image, mask.astype(np.uint8), rec.prompt, class_name, dataset, attrs, "endoscopy",
        rec.alternatives,
    )


def blob_samples(
    n: int = 8, side: int = 64, seed: int = 0, ptype: PromptType = PromptType.P6, cell: int = 4
) -> list[SampleTriplet]:
    """Images with one or two rectangular blobs aligned to a ``cell`` grid."""
    rng = np.random.default_rng(seed)
    out = []
    g = side // cell
    for i in range(n):
        mask = np.zeros((side, side), np.uint8)
        for _ in range(int(rng.integers(1, 3))):
            h, w = rng.integers(3, g // 2 + 1, size=2)
            r, c = rng.integers(0, g - h + 1), rng.integers(0, g - w + 1)
            mask[r * cell:(r + h) * cell, c * cell:(c + w) * cell] = 1
        image = _background(rng, side)
        _paint(image, mask, rng)
        image = np.clip(image, 0, 255).astype(np.uint8)
        out.append(_triplet(image, mask, f"blob{i:03d}", "synthetic_blobs", ptype, seed))
    return out


def quadrant_image(rng: np.random.Generator, side: int = 64, square: int = 12, cell: int = 4):
    """Image with one identical square per quadrant; returns (image, masks by quadrant name)."""
    image = _background(rng, side)
    half = side // 2
    masks = {}
    for q, name in enumerate(QUADRANTS):
        top, left = q // 2, q % 2
        # keep each centroid inside its corner cell of the 3 x 3 grid
        dr, dc = rng.integers(0, 3, size=2) * cell
        r = dr + cell if top == 0 else side - square - cell - dr
        c = dc + cell if left == 0 else side - square - cell - dc
        assert (r < half) == (top == 0) and (c < half) == (left == 0)
        mask = np.zeros((side, side), np.uint8)
        mask[r:r + square, c:c + square] = 1
        masks[name] = mask
    colour = np.array([220.0, 120.0, 140.0]) + rng.normal(0, 10, size=3)
    for mask in masks.values():
        image[mask.astype(bool)] = colour + rng.normal(0, 6, size=(int(mask.sum()), 3))
    return np.clip(image, 0, 255).astype(np.uint8), masks


def quadrant_samples(
    n_images: int = 16, side: int = 64, seed: int = 0, ptype: PromptType = PromptType.P6
) -> list[SampleTriplet]:
    """Four triplets per image, one per quadrant; only the prompt's location says which."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_images):
        image, masks = quadrant_image(rng, side)
        for name, mask in masks.items():
            sample_id = f"quad{i:03d}_{name.replace(' ', '_')}"
            out.append(_triplet(image, mask, sample_id, "synthetic_quadrants", ptype, seed))
    return out


def write_dataset(
    root: str | Path,
    splits: dict[str, Sequence[tuple[str, np.ndarray, np.ndarray]]],
    class_table: dict[str, int],
    sidecar: dict | None = None,
) -> Path:
    """Write (id, image, label mask) items in the standard directory layout."""
    root = Path(root)
    for split, items in splits.items():
        (root / "images" / split).mkdir(parents=True, exist_ok=True)
        (root / "masks" / split).mkdir(parents=True, exist_ok=True)
        for sample_id, image, mask in items:
            Image.fromarray(np.asarray(image, np.uint8)).save(root / "images" / split / f"{sample_id}.png")
            mask = np.asarray(mask)
            if mask.ndim == 3:
                np.save(root / "masks" / split / f"{sample_id}.npy", mask.astype(np.uint8))
            else:
                Image.fromarray(mask.astype(np.uint8)).save(root / "masks" / split / f"{sample_id}.png")
    (root / "classes.json").write_text(json.dumps(class_table, indent=2))
    if sidecar is not None:
        (root / "attributes.json").write_text(json.dumps(sidecar, indent=2))
    return root


def write_blob_dataset(root: str | Path, counts=(8, 4, 4), side: int = 64, seed: int = 0) -> Path:
    """A binary polyp-like dataset on disk with a colour/shape sidecar."""
    splits, sidecar = {}, {}
    offset = 0
    for split, n in zip(("train", "val", "test"), counts):
        samples = blob_samples(n, side, seed + offset)
        items = []
        for s in samples:
            sid = f"{split}_{s.sample_id}"
            items.append((sid, s.image, s.mask))
            sidecar[sid] = {"color": "pink", "shape": "round"}
        splits[split] = items
        offset += 1000
    return write_dataset(root, splits, {"polyp": 1}, sidecar)

"""On-disk dataset handles, image-class triplets and pooled datasets.

Layout of one dataset root::

    <root>/classes.json                 {"class name": label, ...}
    <root>/images/<split>/<id>.<ext>
    <root>/masks/<split>/<id>.png       label-indexed (or <id>.npy class stack)
    <root>/<split>.txt                  optional manifest: one id per line
    <root>/attributes.json              optional attribute sidecar
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from ..prompts import AttributeSet, PromptRecord, PromptType, per_class_masks
from .registry import SPLITS, DatasetDescriptor

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
MASK_EXTS = (".png", ".npy", ".bmp", ".tif", ".tiff", ".jpg")


@dataclass(frozen=True, eq=False)
class SampleTriplet:
    sample_id: str
    image: np.ndarray  # H x W x 3, uint8
    mask: np.ndarray  # H x W, {0, 1}
    prompt: str
    class_name: str
    dataset: str
    attributes: AttributeSet | None = None
    family: str | None = None
    # renderings to draw from during training; empty means use ``prompt``
    prompt_options: tuple[str, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f"{self.sample_id}: image must be H x W x 3, got {self.image.shape}")
        if self.mask.shape != self.image.shape[:2]:
            raise ValueError(f"{self.sample_id}: mask {self.mask.shape} does not match image {self.image.shape[:2]}")

    @property
    def key(self) -> str:
        return f"{self.dataset}/{self.sample_id}/{self.class_name}"

    def with_prompt(self, prompt: str) -> SampleTriplet:
        return SampleTriplet(
            self.sample_id, self.image, self.mask, prompt, self.class_name, self.dataset,
            self.attributes, self.family, (),
        )


def expand_multiclass(
    image: np.ndarray,
    mask: np.ndarray,
    class_table: Mapping[str, int],
    prompts: Mapping[str, str | PromptRecord] | None = None,
    sample_id: str = "",
    dataset: str = "",
    include_absent: bool = True,
    family: str | None = None,
) -> list[SampleTriplet]:
    """One binary triplet per class of ``class_table``.

    Classes absent from the image are emitted with an all-zero mask unless
    ``include_absent`` is false.
    """
    image = np.asarray(image)
    binaries = per_class_masks(mask, class_table)
    out = []
    for class_name, binary in binaries.items():
        if not include_absent and not binary.any():
            continue
        entry = (prompts or {}).get(class_name, "")
        if isinstance(entry, PromptRecord):
            prompt, attrs, options = entry.prompt, entry.attributes, entry.alternatives
            fam = entry.family or family
        else:
            prompt, attrs, options, fam = entry, None, (), family
        out.append(
            SampleTriplet(sample_id, image, binary.astype(np.uint8), prompt, class_name, dataset, attrs, fam, options)
        )
    return out


def load_image(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def load_label_mask(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path)
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr


def _find(directory: Path, stem: str, exts: Sequence[str]) -> Path | None:
    for ext in exts:
        path = directory / f"{stem}{ext}"
        if path.exists():
            return path
    return None


def _list_ids(directory: Path, exts: Sequence[str]) -> list[str]:
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.iterdir() if p.suffix.lower() in exts)


class DatasetHandle:
    """Read-only view of a registered dataset."""

    def __init__(
        self,
        descriptor: DatasetDescriptor,
        root: Path,
        class_table: dict[str, int],
        split_ids: dict[str, list[str]],
        binary_255: bool = False,
    ):
        self.descriptor = descriptor
        self.root = root
        self.class_table = class_table
        self._ids = split_ids
        self._binary_255 = binary_255

    @property
    def name(self) -> str:
        return self.descriptor.name

    @property
    def family(self) -> str:
        return self.descriptor.family

    def ids(self, split: str) -> list[str]:
        return list(self._ids[split])

    def split_sizes(self) -> dict[str, int]:
        return {s: len(v) for s, v in self._ids.items()}

    def image_path(self, split: str, sample_id: str) -> Path:
        return _find(self.root / "images" / split, sample_id, IMAGE_EXTS)

    def mask_path(self, split: str, sample_id: str) -> Path:
        return _find(self.root / "masks" / split, sample_id, MASK_EXTS)

    def load_image(self, split: str, sample_id: str) -> np.ndarray:
        return load_image(self.image_path(split, sample_id))

    def load_mask(self, split: str, sample_id: str) -> np.ndarray:
        mask = load_label_mask(self.mask_path(split, sample_id))
        if len(self.class_table) == 1 and mask.ndim == 2 and mask.max() > 1:
            # binary masks saved as 0/255
            mask = (mask > 127).astype(np.uint8) * next(iter(self.class_table.values()))
        return mask

    def iter_masks(self, split: str) -> Iterable[tuple[str, np.ndarray]]:
        for sample_id in self._ids[split]:
            yield sample_id, self.load_mask(split, sample_id)

    def sidecar_path(self) -> Path | None:
        path = self.root / "attributes.json"
        return path if path.exists() else None

    def triplets(
        self,
        split: str,
        records: Mapping[tuple[str, str, PromptType], PromptRecord] | None = None,
        ptype: PromptType | str = PromptType.P0,
        include_absent: bool = True,
    ) -> list[SampleTriplet]:
        """Triplets for ``split`` with the prompts of ``ptype`` from ``records``."""
        ptype = PromptType.parse(ptype)
        out = []
        for sample_id in self._ids[split]:
            prompts = {}
            for class_name in self.class_table:
                rec = (records or {}).get((sample_id, class_name, ptype))
                if rec is None and records is not None and ptype is not PromptType.P0:
                    raise KeyError(f"no {ptype.value} prompt for {self.name}/{sample_id}/{class_name}")
                prompts[class_name] = rec if rec is not None else ""
            out.extend(
                expand_multiclass(
                    self.load_image(split, sample_id), self.load_mask(split, sample_id), self.class_table,
                    prompts, sample_id, self.name, include_absent, self.family,
                )
            )
        return out


def register_dataset(descriptor: DatasetDescriptor, root: str | Path, strict_counts: bool = False) -> DatasetHandle:
    root = Path(root)
    classes_file = root / "classes.json"
    if classes_file.exists():
        class_table = {str(k): int(v) for k, v in json.loads(classes_file.read_text()).items()}
    else:
        class_table = descriptor.default_class_table()
    if any(v <= 0 for v in class_table.values()):
        raise ValueError(f"{descriptor.name}: class labels must be positive (0 is background)")

    split_ids: dict[str, list[str]] = {}
    for split in SPLITS:
        manifest = root / f"{split}.txt"
        if manifest.exists():
            ids = [line.strip() for line in manifest.read_text().splitlines() if line.strip()]
        else:
            ids = _list_ids(root / "images" / split, IMAGE_EXTS)
        split_ids[split] = ids

    if descriptor.test_only and (split_ids["train"] or split_ids["val"]):
        raise ValueError(f"{descriptor.name} is test-only but has train/val samples under {root}")
    if not any(split_ids.values()):
        raise ValueError(f"no samples found under {root}")

    seen: dict[str, str] = {}
    for split, ids in split_ids.items():
        for sample_id in ids:
            if sample_id in seen:
                raise ValueError(f"{descriptor.name}: sample {sample_id!r} in both {seen[sample_id]} and {split}")
            seen[sample_id] = split
            if _find(root / "images" / split, sample_id, IMAGE_EXTS) is None:
                raise FileNotFoundError(f"{descriptor.name}: missing image for {split}/{sample_id}")
            if _find(root / "masks" / split, sample_id, MASK_EXTS) is None:
                raise FileNotFoundError(f"{descriptor.name}: missing mask for {split}/{sample_id}")

    observed = {s: len(v) for s, v in split_ids.items()}
    if observed != descriptor.splits:
        msg = f"{descriptor.name}: split counts {observed} differ from expected {descriptor.splits}"
        if strict_counts:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
    return DatasetHandle(descriptor, root, class_table, split_ids)


@dataclass(frozen=True)
class PooledDataset:
    members: tuple[DatasetDescriptor, ...]
    kind: str
    # per split: (dataset name, sample id) in concatenation order
    entries: dict[str, tuple[tuple[str, str], ...]]
    seed: int = 0

    def split_sizes(self) -> dict[str, int]:
        return {s: len(v) for s, v in self.entries.items()}

    def order(self, split: str, epoch: int | None = None) -> list[tuple[str, str]]:
        """Entries of ``split``; shuffled as a pure function of (seed, epoch)."""
        items = list(self.entries[split])
        if epoch is None:
            return items
        perm = np.random.default_rng([self.seed, epoch]).permutation(len(items))
        return [items[i] for i in perm]


POOL_KINDS = ("all", "endoscopy")


def pool(handles: Sequence[DatasetHandle], kind: str = "all", seed: int = 0) -> PooledDataset:
    if kind not in POOL_KINDS:
        raise ValueError(f"pool kind must be one of {POOL_KINDS}")
    if not handles:
        raise ValueError("cannot pool zero datasets")
    for h in handles:
        if h.descriptor.test_only:
            raise ValueError(f"{h.name} is test-only and cannot be pooled into train")
        if kind == "endoscopy" and h.family != "endoscopy":
            raise ValueError(f"{h.name} is not an endoscopy dataset")
    entries = {
        split: tuple((h.name, sid) for h in handles for sid in h.ids(split)) for split in SPLITS
    }
    return PooledDataset(tuple(h.descriptor for h in handles), kind, entries, seed)

"""Prompt records: one prompt per (sample, class, prompt type), as JSON lines."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .attributes import AttributeKey, AttributeSet, PromptType, Provenance
from .masks import ExtractionConfig, extract_mask_attributes
from .sidecar import SidecarEntry, merge_with_sidecar
from .templates import MissingAttributeError, compose_all, compose_prompt, get_family


def sample_rng(sample_id: str, seed: int = 0, *salt: object) -> np.random.Generator:
    """Generator seeded from the sample id, stable across processes."""
    digest = hashlib.sha256(":".join([str(seed), sample_id, *map(str, salt)]).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


@dataclass(frozen=True)
class PromptRecord:
    sample_id: str
    class_name: str
    ptype: PromptType
    prompt: str
    attributes: AttributeSet = field(default_factory=AttributeSet)
    family: str | None = None
    # every rendering the template can produce (bank draws x phrasings);
    # stored only when there is more than one
    alternatives: tuple[str, ...] = ()

    def to_json(self) -> dict:
        out = {
            "sample_id": self.sample_id,
            "class": self.class_name,
            "ptype": self.ptype.value,
            "prompt": self.prompt,
            "attributes": self.attributes.to_json(),
            "provenance": self.attributes.provenance_json(),
        }
        if self.family:
            out["family"] = self.family
        if len(self.alternatives) > 1:
            out["alternatives"] = list(self.alternatives)
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> PromptRecord:
        family = obj.get("family")
        alternatives = obj.get("alternatives") or ((obj["prompt"],) if family else ())
        return cls(
            sample_id=str(obj["sample_id"]),
            class_name=str(obj["class"]),
            ptype=PromptType.parse(obj["ptype"]),
            prompt=obj["prompt"],
            attributes=AttributeSet.from_json(obj.get("attributes", {}), obj.get("provenance")),
            family=family,
            alternatives=tuple(alternatives),
        )


def class_attributes(
    binary_mask,
    class_name: str,
    sidecar: SidecarEntry | None = None,
    config: ExtractionConfig = ExtractionConfig(),
    other_present: Iterable[str] | None = None,
) -> AttributeSet:
    derived = extract_mask_attributes(binary_mask, config).to_attributes()
    attrs = derived.with_value(AttributeKey.CLASS_KEYWORD, class_name, Provenance.LITERAL)
    if other_present is not None:
        attrs = attrs.with_value(AttributeKey.PATHOLOGY, tuple(other_present), Provenance.MASK_DERIVED)
    return merge_with_sidecar(attrs, sidecar, class_name)


def build_record(
    family: str,
    ptype: PromptType,
    sample_id: str,
    class_name: str,
    attrs: AttributeSet,
    seed: int = 0,
) -> PromptRecord:
    """Compose one record; the evaluation prompt is fixed by the sample id.

    Samples whose mask is empty lack the mask-derived slots of the richer
    templates; those fall back to the class-name prompt.
    """
    rng = sample_rng(sample_id, seed, class_name, ptype.value)
    try:
        prompt = compose_prompt(family, ptype, attrs, rng)
        alternatives = compose_all(family, ptype, attrs)
    except MissingAttributeError as err:
        absent = attrs.get(AttributeKey.NUMBER) == "no"
        if not absent or err.key not in (AttributeKey.SIZE, AttributeKey.LOCATION, AttributeKey.SHAPE,
                                         AttributeKey.COLOR, AttributeKey.NUMBER):
            raise
        prompt = compose_prompt(family, PromptType.P1, attrs, rng)
        alternatives = compose_all(family, PromptType.P1, attrs)
    return PromptRecord(sample_id, class_name, ptype, prompt, attrs, family, tuple(alternatives))


def generate_prompt_records(
    family: str,
    class_table: Mapping[str, int],
    masks: Iterable[tuple[str, np.ndarray]],
    sidecar: Mapping[str, SidecarEntry] | None = None,
    ptypes: Iterable[PromptType] | None = None,
    seed: int = 0,
    config: ExtractionConfig = ExtractionConfig(),
    pathology_from_mask: bool | None = None,
) -> list[PromptRecord]:
    """Records for every sample x class x prompt type.

    ``masks`` yields (sample_id, mask) with a 2D label map or a (C, H, W)
    stack of binary masks ordered like ``class_table`` labels.
    """
    fam = get_family(family)
    types = [PromptType.parse(p) for p in (ptypes or fam.available)]
    if pathology_from_mask is None:
        pathology_from_mask = fam.name == "chexlocalize"
    sidecar = sidecar or {}
    records: list[PromptRecord] = []
    for sample_id, mask in masks:
        binaries = per_class_masks(mask, class_table)
        present = [c for c, m in binaries.items() if m.any()]
        for class_name, binary in binaries.items():
            others = [c for c in present if c != class_name] if pathology_from_mask else None
            attrs = class_attributes(binary, class_name, sidecar.get(sample_id), config, others)
            for ptype in types:
                records.append(build_record(fam.name, ptype, sample_id, class_name, attrs, seed))
    return records


def per_class_masks(mask: np.ndarray, class_table: Mapping[str, int]) -> dict[str, np.ndarray]:
    mask = np.asarray(mask)
    labels = sorted(class_table.items(), key=lambda kv: kv[1])
    if mask.ndim == 3:
        if mask.shape[0] != len(labels):
            raise ValueError(f"mask stack has {mask.shape[0]} channels for {len(labels)} classes")
        return {name: mask[i].astype(bool) for i, (name, _) in enumerate(labels)}
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2D or a class stack, got shape {mask.shape}")
    known = {0, *class_table.values()}
    unknown = sorted(set(np.unique(mask).tolist()) - known)
    if unknown:
        raise ValueError(f"unknown label(s) {unknown} in mask; class table: {dict(class_table)}")
    return {name: mask == label for name, label in labels}


def literal_records(prompts: Mapping[str, str], class_name: str, ptype=PromptType.P1) -> list[PromptRecord]:
    """Free-text prompts (e.g. radiology reports) that bypass the templates."""
    ptype = PromptType.parse(ptype)
    out = []
    for sample_id, text in prompts.items():
        attrs = AttributeSet({AttributeKey.CLASS_KEYWORD: class_name}, Provenance.LITERAL)
        out.append(PromptRecord(sample_id, class_name, ptype, text, attrs, None, ()))
    return out


def load_free_text_prompts(path: str | Path, class_name: str, ptype=PromptType.P1) -> list[PromptRecord]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("free-text prompt file must map sample id to text")
    return literal_records({str(k): str(v) for k, v in data.items()}, class_name, ptype)


def write_jsonl(records: Iterable[PromptRecord], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> list[PromptRecord]:
    with Path(path).open() as fh:
        return [PromptRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def index_records(records: Iterable[PromptRecord]) -> dict[tuple[str, str, PromptType], PromptRecord]:
    return {(r.sample_id, r.class_name, r.ptype): r for r in records}

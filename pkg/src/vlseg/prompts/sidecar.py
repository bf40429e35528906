"""Attribute sidecar files: per-sample metadata that masks cannot provide.

Format: a JSON object keyed by sample id. Each value maps attribute names
to strings (or lists for location/pathology). The reserved key
``"classes"`` holds per-class overrides, e.g.::

    {"patient0001_2CH_ED": {"view": "two-chamber", "cycle": "diastole",
                            "classes": {"Myocardium": {"shape": "circular"}}}}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .attributes import AttributeSet, Provenance, parse_key

CLASSES_KEY = "classes"


@dataclass(frozen=True)
class SidecarEntry:
    shared: AttributeSet
    per_class: dict[str, AttributeSet] = field(default_factory=dict)

    def for_class(self, class_name: str) -> AttributeSet:
        specific = self.per_class.get(class_name)
        if specific is None:
            return self.shared
        return specific.merged(self.shared)

    def __len__(self) -> int:
        return len(self.shared)


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ValueError(f"duplicate key {key!r} in sidecar")
        out[key] = value
    return out


def _fragment(sample_id: str, raw) -> AttributeSet:
    if not isinstance(raw, dict):
        raise ValueError(f"sidecar entry for {sample_id!r} must be an object")
    values = {}
    for name, value in raw.items():
        try:
            key = parse_key(name)
        except KeyError as err:
            raise ValueError(f"unknown attribute key {name!r} for sample {sample_id!r}: {err.args[0]}") from None
        values[key] = value
    return AttributeSet(values, Provenance.SIDECAR)


def parse_sidecar(data: dict) -> dict[str, SidecarEntry]:
    if not isinstance(data, dict):
        raise ValueError("sidecar must be a JSON object keyed by sample id")
    out: dict[str, SidecarEntry] = {}
    for sample_id, raw in data.items():
        raw = dict(raw) if isinstance(raw, dict) else raw
        per_class_raw = raw.pop(CLASSES_KEY, {}) if isinstance(raw, dict) else {}
        per_class = {cls: _fragment(sample_id, attrs) for cls, attrs in per_class_raw.items()}
        out[sample_id] = SidecarEntry(_fragment(sample_id, raw), per_class)
    return out


def load_attribute_sidecar(path: str | Path) -> dict[str, SidecarEntry]:
    text = Path(path).read_text()
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except ValueError as err:
        if "duplicate key" in str(err):
            raise ValueError(f"duplicate sample id in {path}: {err}") from None
        raise
    return parse_sidecar(data)


def merge_with_sidecar(derived: AttributeSet, entry: SidecarEntry | None, class_name: str) -> AttributeSet:
    """Sidecar values fill gaps only; mask-derived values always win."""
    if entry is None:
        return derived
    return derived.merged(entry.for_class(class_name))

"""Prompt perturbations that edit one attribute slot and leave the rest verbatim."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from ..data.datasets import SampleTriplet
from ..prompts.attributes import LIST_VALUED, AttributeKey, AttributeSet, PromptType, parse_key
from ..prompts.generate import build_record, sample_rng
from .vocab import DEFAULT_OPPOSITES, UNCOMMON_WORDS, OppositeMap


class Mode(str, Enum):
    IDENTITY = "identity"
    RANDOM_WORD = "random_word"
    OPPOSITE = "opposite"
    CLASS_NAME_ONLY = "class_name_only"
    SWAP_WITHIN_DATASET = "swap_within_dataset"


TARGETED = (Mode.RANDOM_WORD, Mode.OPPOSITE, Mode.SWAP_WITHIN_DATASET)


@dataclass(frozen=True)
class PerturbationSpec:
    mode: Mode = Mode.IDENTITY
    target: AttributeKey | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode in TARGETED:
            if self.target is None:
                raise ValueError(f"{self.mode.value} needs a target attribute")
            object.__setattr__(self, "target", parse_key(self.target))
        else:
            object.__setattr__(self, "target", None)
        if self.mode is Mode.OPPOSITE and self.target not in DEFAULT_OPPOSITES.keys():
            raise ValueError(f"no opposite map for attribute {self.target.value}")

    @property
    def name(self) -> str:
        if self.target is None:
            return self.mode.value
        return f"{self.mode.value}:{self.target.value}"

    def to_json(self) -> dict:
        out = {"mode": self.mode.value, "seed": self.seed}
        if self.target is not None:
            out["target"] = self.target.value
        return out

    @classmethod
    def from_json(cls, data: dict) -> PerturbationSpec:
        unknown = set(data) - {"mode", "target", "seed"}
        if unknown:
            raise KeyError(f"unknown perturbation keys: {', '.join(sorted(unknown))}")
        return cls(Mode(data.get("mode", "identity")), data.get("target"), int(data.get("seed", 0)))

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> PerturbationSpec:
        """'identity', 'class_name_only' or '<mode>:<attribute>'."""
        mode, _, target = text.partition(":")
        return cls(Mode(mode), target or None, seed)


IDENTITY = PerturbationSpec()


def load_suite(path: str | Path) -> list[PerturbationSpec]:
    """A JSON list of specs, or {"specs": [...]}."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data["specs"]
    return [PerturbationSpec.from_json(d) for d in data]


def default_suite(attributes: Iterable[AttributeKey], seed: int = 0) -> list[PerturbationSpec]:
    """Identity, class-name-only, and every targeted mode applicable to ``attributes``."""
    specs = [IDENTITY, PerturbationSpec(Mode.CLASS_NAME_ONLY, seed=seed)]
    for key in attributes:
        if key is AttributeKey.CLASS_KEYWORD or key is AttributeKey.GENERAL_CLASS_INFO:
            continue
        specs.append(PerturbationSpec(Mode.RANDOM_WORD, key, seed))
        if key in DEFAULT_OPPOSITES.keys():
            specs.append(PerturbationSpec(Mode.OPPOSITE, key, seed))
    return specs


def _canonical(value) -> tuple[str, ...] | str:
    return tuple(value) if isinstance(value, (list, tuple)) else str(value)


def replacement(
    value,
    key: AttributeKey,
    spec: PerturbationSpec,
    rng,
    family: str | None = None,
    value_set: Sequence | None = None,
    opposites: OppositeMap = DEFAULT_OPPOSITES,
):
    """The new value for ``key``; list values are replaced element-wise."""
    if spec.mode is Mode.SWAP_WITHIN_DATASET:
        current = _canonical(value)
        choices = sorted({_canonical(v) for v in (value_set or ())} - {current}, key=str)
        if not choices:
            raise ValueError(f"no other {key.value} value observed to swap with {value!r}")
        return choices[int(rng.integers(len(choices)))]
    items = list(value) if key in LIST_VALUED and isinstance(value, (list, tuple)) else None
    if spec.mode is Mode.OPPOSITE:
        if items is not None:
            return tuple(opposites.opposite(key, v, family) for v in items)
        return opposites.opposite(key, value, family)
    if spec.mode is Mode.RANDOM_WORD:
        if items is not None:
            picks = rng.choice(len(UNCOMMON_WORDS), size=len(items), replace=False)
            return tuple(UNCOMMON_WORDS[i] for i in picks)
        return UNCOMMON_WORDS[int(rng.integers(len(UNCOMMON_WORDS)))]
    raise ValueError(f"{spec.mode.value} does not replace attribute values")


def perturb_prompt(
    attrs: AttributeSet,
    family: str,
    ptype: PromptType | str,
    spec: PerturbationSpec,
    *,
    sample_id: str = "",
    class_name: str | None = None,
    seed: int = 0,
    value_set: Sequence | None = None,
    opposites: OppositeMap = DEFAULT_OPPOSITES,
) -> str:
    """Compose the (possibly perturbed) prompt for one sample.

    Template randomness (bank entry, phrasing) is seeded from the sample
    exactly as during prompt generation, so base and perturbed prompts
    differ only in the targeted slot. A target absent from ``attrs``
    leaves the prompt unchanged.
    """
    ptype = PromptType.parse(ptype)
    class_name = class_name if class_name is not None else str(attrs.get(AttributeKey.CLASS_KEYWORD, ""))

    def render(a: AttributeSet, p: PromptType) -> str:
        return build_record(family, p, sample_id, class_name, a, seed).prompt

    if spec.mode is Mode.IDENTITY:
        return render(attrs, ptype)
    if spec.mode is Mode.CLASS_NAME_ONLY:
        return render(attrs, PromptType.P1) if ptype is not PromptType.P0 else ""
    if spec.target not in attrs:
        return render(attrs, ptype)
    rng = sample_rng(sample_id, spec.seed, "perturb", spec.mode.value, spec.target.value, class_name)
    new = replacement(attrs[spec.target], spec.target, spec, rng, family, value_set, opposites)
    return render(attrs.with_value(spec.target, new, attrs.provenance(spec.target)), ptype)


def observed_values(triplets: Iterable[SampleTriplet], key: AttributeKey) -> list:
    seen: dict = {}
    for t in triplets:
        if t.attributes is not None and key in t.attributes:
            seen.setdefault(_canonical(t.attributes[key]), None)
    return list(seen)


def perturb_triplets(
    triplets: Sequence[SampleTriplet],
    ptype: PromptType | str,
    spec: PerturbationSpec,
    seed: int = 0,
    family: str | None = None,
) -> list[str]:
    """One prompt per triplet; identity returns the stored prompts untouched."""
    if spec.mode is Mode.IDENTITY:
        return [t.prompt for t in triplets]
    value_set = observed_values(triplets, spec.target) if spec.mode is Mode.SWAP_WITHIN_DATASET else None
    out = []
    for t in triplets:
        fam = family or t.family
        if t.attributes is None or fam is None:
            raise ValueError(f"{t.key}: perturbation needs the triplet's attributes and prompt family")
        out.append(perturb_prompt(t.attributes, fam, ptype, spec, sample_id=t.sample_id, class_name=t.class_name,
                                  seed=seed, value_set=value_set))
    return out

"""Prompt attributes, their provenance, and the prompt-type enum."""
from __future__ import annotations

import enum
from typing import Iterator, Mapping, Sequence, Union

AttributeValue = Union[str, tuple[str, ...]]


class AttributeKey(str, enum.Enum):
    CLASS_KEYWORD = "class_keyword"  # a1
    SHAPE = "shape"  # a2
    COLOR = "color"  # a3
    SIZE = "size"  # a4
    NUMBER = "number"  # a5
    LOCATION = "location"  # a6
    GENERAL_CLASS_INFO = "general_class_info"  # a7
    VIEW = "view"  # a8
    PATHOLOGY = "pathology"  # a9
    CARDIAC_CYCLE = "cardiac_cycle"  # a10
    GENDER = "gender"  # a11
    AGE = "age"  # a12
    IMAGE_QUALITY = "image_quality"  # a13
    TUMOR_TYPE = "tumor_type"  # a14

    @property
    def code(self) -> str:
        return f"a{list(AttributeKey).index(self) + 1}"


# Short names accepted wherever attribute keys are parsed from user input.
KEY_ALIASES: dict[str, AttributeKey] = {
    "class": AttributeKey.CLASS_KEYWORD,
    "class_name": AttributeKey.CLASS_KEYWORD,
    "cycle": AttributeKey.CARDIAC_CYCLE,
    "quality": AttributeKey.IMAGE_QUALITY,
    "general_description": AttributeKey.GENERAL_CLASS_INFO,
    "tumor type": AttributeKey.TUMOR_TYPE,
}

LIST_VALUED = frozenset({AttributeKey.LOCATION, AttributeKey.PATHOLOGY})


def parse_key(name: str | AttributeKey) -> AttributeKey:
    if isinstance(name, AttributeKey):
        return name
    try:
        return AttributeKey(name)
    except ValueError:
        pass
    if name in KEY_ALIASES:
        return KEY_ALIASES[name]
    valid = sorted([k.value for k in AttributeKey] + list(KEY_ALIASES))
    raise KeyError(f"unknown attribute key {name!r}; valid keys: {', '.join(valid)}")


class Provenance(str, enum.Enum):
    MASK_DERIVED = "mask_derived"
    SIDECAR = "sidecar"
    BANK = "bank"
    LITERAL = "literal"


class PromptType(str, enum.Enum):
    P0 = "P0"
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P5 = "P5"
    P6 = "P6"
    P7 = "P7"
    P8 = "P8"
    P9 = "P9"

    @property
    def index(self) -> int:
        return int(self.value[1:])

    @classmethod
    def parse(cls, value: str | int | PromptType) -> PromptType:
        if isinstance(value, PromptType):
            return value
        if isinstance(value, int):
            return cls(f"P{value}")
        return cls(value.upper() if value.lower().startswith("p") else f"P{value}")


def _normalize(key: AttributeKey, value) -> AttributeValue:
    if key in LIST_VALUED:
        if isinstance(value, str):
            return (value,)
        return tuple(str(v) for v in value)
    if not isinstance(value, str):
        raise TypeError(f"attribute {key.value} expects a string, got {type(value).__name__}")
    return value


class AttributeSet(Mapping[AttributeKey, AttributeValue]):
    """Immutable attribute map with a provenance tag per entry."""

    __slots__ = ("_values", "_provenance")

    def __init__(
        self,
        values: Mapping[str | AttributeKey, object] | None = None,
        provenance: Provenance | Mapping[str | AttributeKey, Provenance] = Provenance.LITERAL,
    ):
        self._values: dict[AttributeKey, AttributeValue] = {}
        self._provenance: dict[AttributeKey, Provenance] = {}
        for name, value in (values or {}).items():
            key = parse_key(name)
            self._values[key] = _normalize(key, value)
            if isinstance(provenance, Provenance):
                self._provenance[key] = provenance
            else:
                tags = {parse_key(k): Provenance(v) for k, v in provenance.items()}
                self._provenance[key] = tags.get(key, Provenance.LITERAL)

    def __getitem__(self, key: str | AttributeKey) -> AttributeValue:
        return self._values[parse_key(key)]

    def __contains__(self, key: object) -> bool:
        try:
            return parse_key(key) in self._values  # type: ignore[arg-type]
        except (KeyError, ValueError):
            return False

    def __iter__(self) -> Iterator[AttributeKey]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        body = ", ".join(f"{k.value}={v!r}" for k, v in self._values.items())
        return f"AttributeSet({body})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttributeSet):
            return NotImplemented
        return self._values == other._values and self._provenance == other._provenance

    def provenance(self, key: str | AttributeKey) -> Provenance:
        return self._provenance[parse_key(key)]

    def with_value(
        self, key: str | AttributeKey, value, provenance: Provenance = Provenance.LITERAL
    ) -> AttributeSet:
        key = parse_key(key)
        out = self._copy()
        out._values[key] = _normalize(key, value)
        out._provenance[key] = provenance
        return out

    def without(self, key: str | AttributeKey) -> AttributeSet:
        key = parse_key(key)
        out = self._copy()
        out._values.pop(key, None)
        out._provenance.pop(key, None)
        return out

    def merged(self, other: AttributeSet, override: bool = False) -> AttributeSet:
        """Union of both sets. Entries already present win unless ``override``."""
        out = self._copy()
        for key, value in other._values.items():
            if key in out._values and not override:
                continue
            out._values[key] = value
            out._provenance[key] = other._provenance[key]
        return out

    def to_json(self) -> dict[str, object]:
        return {
            k.value: (list(v) if isinstance(v, tuple) else v) for k, v in self._values.items()
        }

    def provenance_json(self) -> dict[str, str]:
        return {k.value: p.value for k, p in self._provenance.items()}

    @classmethod
    def from_json(
        cls, values: Mapping[str, object], provenance: Mapping[str, str] | None = None
    ) -> AttributeSet:
        if provenance is None:
            return cls(values)
        return cls(values, {k: Provenance(v) for k, v in provenance.items()})

    def _copy(self) -> AttributeSet:
        out = AttributeSet()
        out._values = dict(self._values)
        out._provenance = dict(self._provenance)
        return out


def join_list(value: AttributeValue | Sequence[str]) -> str:
    if isinstance(value, str):
        return value
    return ", ".join(value)

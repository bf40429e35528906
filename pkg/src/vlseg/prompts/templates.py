"""Prompt templates P0-P9 for every dataset family.

Templates reproduce the published prompt lists word for word, including
their inconsistencies (e.g. "chest Xray" vs "Chest Xray" in CheXlocalize).
"""
from __future__ import annotations

import random
from typing import Sequence

import numpy as np

from .attributes import AttributeKey as K
from .attributes import AttributeSet, PromptType, join_list
from .banks import GENERAL_DESCRIPTIONS

P = PromptType


class PromptUnavailableError(ValueError):
    """The requested prompt type is N/A for the dataset family."""


class MissingAttributeError(KeyError):
    def __init__(self, key: K, family: str, ptype: PromptType):
        self.key = key
        super().__init__(f"missing required attribute {key.value!r} for {family} {ptype.value}")


def choice_index(rng, n: int) -> int:
    if n == 1:
        return 0
    if rng is None:
        raise ValueError("a seeded rng is required to choose among prompt variants")
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(n))
    if isinstance(rng, random.Random):
        return rng.randrange(n)
    raise TypeError(f"unsupported rng type {type(rng).__name__}")


def _cap(text: str) -> str:
    return text[:1].upper() + text[1:]


class Family:
    name: str
    available: Sequence[PromptType]

    def required(self, ptype: PromptType, attrs: AttributeSet) -> tuple[K, ...]:
        raise NotImplementedError

    def n_variants(self, ptype: PromptType, attrs: AttributeSet) -> int:
        return 1

    def render(self, ptype: PromptType, attrs: AttributeSet, variant: int) -> str:
        raise NotImplementedError

    def uses_bank(self, ptype: PromptType) -> bool:
        return False


class PhotographicFamily(Family):
    """Endoscopy, ISIC and DFU share one template list."""

    available = tuple(PromptType)
    _REQUIRED = {
        P.P1: (K.CLASS_KEYWORD,),
        P.P2: (K.SHAPE, K.CLASS_KEYWORD),
        P.P3: (K.COLOR, K.SHAPE, K.CLASS_KEYWORD),
        P.P4: (K.SIZE, K.COLOR, K.SHAPE, K.CLASS_KEYWORD),
        P.P5: (K.NUMBER, K.SIZE, K.COLOR, K.SHAPE, K.CLASS_KEYWORD),
        P.P6: (K.NUMBER, K.SIZE, K.COLOR, K.SHAPE, K.CLASS_KEYWORD, K.LOCATION),
        P.P7: (K.CLASS_KEYWORD, K.GENERAL_CLASS_INFO),
        P.P8: (K.NUMBER, K.SIZE, K.COLOR, K.SHAPE, K.CLASS_KEYWORD, K.GENERAL_CLASS_INFO),
        P.P9: (
            K.NUMBER, K.SIZE, K.COLOR, K.SHAPE, K.CLASS_KEYWORD, K.GENERAL_CLASS_INFO, K.LOCATION,
        ),
    }
    # P1-P5 are space-joined attribute runs in this order
    _RUN = {
        P.P1: 1, P.P2: 2, P.P3: 3, P.P4: 4, P.P5: 5,
    }

    def __init__(self, name: str):
        self.name = name

    def required(self, ptype, attrs):
        return self._REQUIRED[ptype]

    def uses_bank(self, ptype):
        return ptype in (P.P7, P.P8, P.P9)

    def render(self, ptype, attrs, variant):
        def run(n: int) -> str:
            keys = self._REQUIRED[P.P5][-n:]
            return " ".join(join_list(attrs[k]) for k in keys)

        if ptype in self._RUN:
            return run(self._RUN[ptype])
        loc = join_list(attrs[K.LOCATION]) if K.LOCATION in attrs else ""
        if ptype is P.P6:
            return f"{run(5)}, located in the {loc} of the image"
        desc = attrs[K.GENERAL_CLASS_INFO]
        if ptype is P.P7:
            return f"{attrs[K.CLASS_KEYWORD]}, which is {desc}"
        if ptype is P.P8:
            return f"{run(5)}, which is {desc}"
        return f"{run(5)}, which is {desc} located in the {loc} of the image"


class CheXlocalizeFamily(Family):
    name = "chexlocalize"
    available = (P.P0, P.P1, P.P2, P.P3, P.P4, P.P5, P.P6)
    _REQUIRED = {
        P.P1: (K.CLASS_KEYWORD,),
        P.P2: (K.CLASS_KEYWORD, K.VIEW),
        P.P3: (K.CLASS_KEYWORD, K.SHAPE, K.VIEW),
        P.P4: (K.CLASS_KEYWORD, K.SHAPE, K.LOCATION, K.VIEW),
        P.P5: (K.CLASS_KEYWORD, K.SHAPE, K.LOCATION, K.VIEW, K.PATHOLOGY),
        P.P6: (K.CLASS_KEYWORD, K.PATHOLOGY),
    }

    def required(self, ptype, attrs):
        return self._REQUIRED[ptype]

    @staticmethod
    def _present(attrs) -> str:
        # no co-occurring findings: the trailing sentence is dropped
        others = join_list(attrs[K.PATHOLOGY])
        return f" {others} are present." if others else ""

    def render(self, ptype, attrs, variant):
        label = attrs[K.CLASS_KEYWORD]
        if ptype is P.P1:
            return f"{label} in a chest Xray."
        if ptype is P.P6:
            return f"{label} in a Chest Xray.{self._present(attrs)}"
        view = attrs[K.VIEW]
        if ptype is P.P2:
            return f"{label} in the {view} view of a Chest Xray."
        shape = attrs[K.SHAPE]
        if ptype is P.P3:
            return f"{label} of shape {shape} in the {view} view of a Chest Xray."
        loc = join_list(attrs[K.LOCATION])
        text = f"{label} of shape {shape}, and located in {loc} of the {view} view of a Chest Xray."
        if ptype is P.P5:
            text += self._present(attrs)
        return text


class CamusFamily(Family):
    name = "camus"
    available = (P.P0, P.P1, P.P2, P.P3, P.P4, P.P5, P.P6, P.P7)
    _ORDER = (K.CLASS_KEYWORD, K.VIEW, K.CARDIAC_CYCLE, K.GENDER, K.AGE, K.IMAGE_QUALITY, K.SHAPE)
    # each level is written against the heart or against the ultrasound
    CONTEXTS = (" of the heart", " in the cardiac ultrasound")

    def required(self, ptype, attrs):
        return self._ORDER[: ptype.index]

    def n_variants(self, ptype, attrs):
        return len(self.CONTEXTS)

    def render(self, ptype, attrs, variant):
        level = ptype.index
        ctx = self.CONTEXTS[variant]
        text = str(attrs[K.CLASS_KEYWORD])
        if level == 1:
            return text + ctx
        if level >= 7:
            text += f" of {attrs[K.SHAPE]} shape"
        text += f" in {attrs[K.VIEW]} view{ctx}"
        if level >= 3:
            text += f" at the end of the {attrs[K.CARDIAC_CYCLE]} cycle"
        if level == 4:
            text += f" of a {attrs[K.GENDER]}"
        elif level >= 5:
            text += f" of a {attrs[K.AGE]} {attrs[K.GENDER]}"
        if level >= 6:
            text += f" with {attrs[K.IMAGE_QUALITY]} image quality"
        return text + "."


class BusiFamily(Family):
    name = "busi"
    available = (P.P0, P.P1, P.P2, P.P3, P.P4, P.P5, P.P6)
    _ORDER = (K.CLASS_KEYWORD, K.TUMOR_TYPE, K.NUMBER, K.SIZE, K.LOCATION, K.SHAPE)
    # second phrasing describes tumor type through margin regularity
    REGULARITY = {"benign": "regular", "malignant": "irregular"}
    SUFFIX = " in the breast ultrasound image"

    @staticmethod
    def _absent(attrs) -> bool:
        return attrs.get(K.NUMBER) in ("no", "zero", "0")

    def required(self, ptype, attrs):
        if self._absent(attrs):
            return (K.CLASS_KEYWORD,)
        return self._ORDER[: ptype.index]

    def n_variants(self, ptype, attrs):
        if ptype.index < 2 or self._absent(attrs):
            return 1
        return 2 if str(attrs[K.TUMOR_TYPE]).lower() in self.REGULARITY else 1

    def render(self, ptype, attrs, variant):
        cls = str(attrs[K.CLASS_KEYWORD])
        if self._absent(attrs):
            return f"No {cls}{self.SUFFIX}"
        level = ptype.index
        if level == 1:
            return f"{cls}{self.SUFFIX}"
        kind = str(attrs[K.TUMOR_TYPE])
        if variant == 1:
            regular = self.REGULARITY[kind.lower()]
            kind = regular if level >= 6 else f"{regular}-shaped"
        words = []
        if level >= 3:
            words.append(str(attrs[K.NUMBER]))
        if level >= 4:
            words.append(str(attrs[K.SIZE]))
        if level >= 6:
            words.append(str(attrs[K.SHAPE]))
        words.append(kind)
        plural = level >= 3 and str(attrs[K.NUMBER]).lower() != "one"
        words.append(cls + "s" if plural else cls)
        text = " ".join(words)
        if level >= 5:
            text += f" at the {join_list(attrs[K.LOCATION])}"
        return _cap(text + self.SUFFIX)


FAMILIES: dict[str, Family] = {
    "endoscopy": PhotographicFamily("endoscopy"),
    "isic": PhotographicFamily("isic"),
    "dfu": PhotographicFamily("dfu"),
    "chexlocalize": CheXlocalizeFamily(),
    "camus": CamusFamily(),
    "busi": BusiFamily(),
}


def get_family(name: str) -> Family:
    try:
        return FAMILIES[name.lower()]
    except KeyError:
        raise KeyError(f"unknown prompt family {name!r}; known: {', '.join(FAMILIES)}") from None


def available_prompt_types(family: str) -> tuple[PromptType, ...]:
    return tuple(get_family(family).available)


def _resolve(family: str, ptype, attrs: AttributeSet):
    fam = get_family(family)
    ptype = PromptType.parse(ptype)
    if ptype not in fam.available:
        raise PromptUnavailableError(f"prompt type unavailable: {ptype.value} for {fam.name}")
    return fam, ptype


def _check(fam: Family, ptype: PromptType, attrs: AttributeSet):
    for key in fam.required(ptype, attrs):
        if key not in attrs:
            raise MissingAttributeError(key, fam.name, ptype)


def compose_prompt(
    family: str,
    ptype: PromptType | str | int,
    attrs: AttributeSet,
    rng=None,
    variant: int | None = None,
) -> str:
    """Instantiate the ``ptype`` template of ``family`` from ``attrs``.

    A missing general-class-info attribute is drawn from the family's
    description bank with ``rng``; where a level has several phrasings
    ``rng`` picks one unless ``variant`` fixes it. Draw order is bank
    first, then phrasing, so a given seed always yields the same string.
    """
    fam, ptype = _resolve(family, ptype, attrs)
    if ptype is P.P0:
        return ""
    if fam.uses_bank(ptype) and K.GENERAL_CLASS_INFO not in attrs:
        bank = GENERAL_DESCRIPTIONS[fam.name]
        attrs = attrs.with_value(K.GENERAL_CLASS_INFO, bank[choice_index(rng, len(bank))])
    _check(fam, ptype, attrs)
    n = fam.n_variants(ptype, attrs)
    if variant is None:
        variant = choice_index(rng, n)
    elif not 0 <= variant < n:
        raise ValueError(f"variant {variant} out of range for {fam.name} {ptype.value} ({n})")
    return fam.render(ptype, attrs, variant)


def compose_all(family: str, ptype, attrs: AttributeSet) -> list[str]:
    """Every distinct string ``compose_prompt`` can return for these inputs."""
    fam, ptype = _resolve(family, ptype, attrs)
    if ptype is P.P0:
        return [""]
    candidates = [attrs]
    if fam.uses_bank(ptype) and K.GENERAL_CLASS_INFO not in attrs:
        candidates = [attrs.with_value(K.GENERAL_CLASS_INFO, d) for d in GENERAL_DESCRIPTIONS[fam.name]]
    out: list[str] = []
    for cand in candidates:
        _check(fam, ptype, cand)
        for v in range(fam.n_variants(ptype, cand)):
            text = fam.render(ptype, cand, v)
            if text not in out:
                out.append(text)
    return out

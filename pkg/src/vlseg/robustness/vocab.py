"""Replacement vocabularies: rare filler words and attribute antonyms."""
from __future__ import annotations

import re
from typing import Iterable, Mapping

from ..prompts.attributes import AttributeKey as K

# Fixed and ordered; seeded draws index into it, so never reorder.
UNCOMMON_WORDS: tuple[str, ...] = (
    "quixotic", "zephyr", "mellifluous", "susurrus", "petrichor", "defenestrate", "borborygmus",
    "flibbertigibbet", "gobbledygook", "lollygag", "kerfuffle", "widdershins", "snollygoster", "bumfuzzle",
    "cattywampus", "collywobbles", "taradiddle", "absquatulate", "brouhaha", "hullabaloo", "skedaddle",
    "discombobulate", "codswallop", "gardyloo", "lickspittle", "nudiustertian", "ultracrepidarian", "troglodyte",
    "xertz", "zugzwang", "ragamuffin", "bamboozle", "hornswoggle", "cantankerous", "serendipity", "ephemeral",
    "sesquipedalian", "pettifogger", "mumpsimus", "abibliophobia", "agastopia", "bibble", "cacophony",
    "erinaceous", "gongoozler", "impignorate", "jentacular", "lamprophony", "macrosmatic", "nudnik",
    "pandiculation", "quockerwodger", "ratoon", "sialoquent", "tittynope", "vellichor", "winklepicker",
    "yarborough", "snickersnee", "fopdoodle", "grandiloquent", "limerence", "crapulence", "brabble",
)

_PAIRS: dict[K, tuple[tuple[str, str], ...]] = {
    K.SIZE: (("small", "large"),),
    K.NUMBER: (("one", "many"),),
    K.COLOR: (("pink", "blue"), ("red", "green"), ("white", "black"), ("yellow", "purple"), ("brown", "gray")),
    K.SHAPE: (("round", "irregular"), ("circular", "angular"), ("square-shaped", "round-shaped"),
              ("triangular", "rectangular")),
    K.GENDER: (("male", "female"),),
    K.CARDIAC_CYCLE: (("diastole", "systole"),),
    K.IMAGE_QUALITY: (("good", "poor"),),
    K.TUMOR_TYPE: (("benign", "malignant"),),
    K.VIEW: (("two-chamber", "four-chamber"), ("frontal", "lateral")),
}

# one-directional entries (no natural inverse)
_ONE_WAY: dict[K, dict[str, str]] = {
    K.SIZE: {"medium": "large"},
    K.NUMBER: {w: "one" for w in ("two", "three", "four", "five", "six", "seven", "eight", "nine", "ten")},
    K.COLOR: {"grey": "brown", "purplish": "yellow", "reddish": "green"},
    K.SHAPE: {"oval": "irregular", "elliptical": "angular", "oval-shaped": "square-shaped"},
    K.IMAGE_QUALITY: {"medium": "poor"},
}

# location is mapped word by word: "top left" -> "bottom right"
_LOCATION_WORDS = {"top": "bottom", "bottom": "top", "left": "right", "right": "left",
                   "upper": "lower", "lower": "upper"}
_LOCATION_SPECIAL = {"center": "top left", "centre": "top left", "middle": "top left"}

_AGE = re.compile(r"^(\d+)-year-old$")


def _build_table() -> dict[K, dict[str, str]]:
    table: dict[K, dict[str, str]] = {}
    for key, pairs in _PAIRS.items():
        entries = table.setdefault(key, {})
        for a, b in pairs:
            entries[a], entries[b] = b, a
    for key, extra in _ONE_WAY.items():
        table.setdefault(key, {}).update(extra)
    return table


class OppositeMap:
    """Semantic antonyms per attribute, with optional per-family extensions."""

    def __init__(self, extensions: Mapping[str, Mapping[K, Mapping[str, str]]] | None = None):
        self._table = _build_table()
        self._extensions = {fam: {K(k): dict(v) for k, v in ext.items()} for fam, ext in (extensions or {}).items()}

    def keys(self) -> set[K]:
        return set(self._table) | {K.LOCATION, K.AGE}

    def _lookup(self, key: K, value: str, family: str | None) -> str | None:
        if family and value in self._extensions.get(family, {}).get(key, {}):
            return self._extensions[family][key][value]
        return self._table.get(key, {}).get(value)

    def opposite(self, key: K | str, value: str, family: str | None = None) -> str:
        key = K(key)
        v = str(value)
        low = v.lower()
        if key is K.LOCATION:
            out = self._location(low)
        elif key is K.AGE and (m := _AGE.match(low)):
            out = "20-year-old" if int(m.group(1)) >= 50 else "80-year-old"
        else:
            out = self._lookup(key, low, family)
        if out is None:
            raise KeyError(f"no opposite for {key.value} value {value!r}")
        return out[:1].upper() + out[1:] if v[:1].isupper() else out

    @staticmethod
    def _location(value: str) -> str | None:
        if value in _LOCATION_SPECIAL:
            return _LOCATION_SPECIAL[value]
        words = value.split()
        if not words or any(w not in _LOCATION_WORDS for w in words):
            return None
        return " ".join(_LOCATION_WORDS[w] for w in words)

    def covers(self, key: K | str, values: Iterable[str], family: str | None = None) -> list[str]:
        """Values lacking an opposite (empty when the map is total over ``values``)."""
        missing = []
        for v in values:
            try:
                self.opposite(key, v, family)
            except KeyError:
                missing.append(v)
        return missing

    def vocabulary(self) -> set[str]:
        words = set()
        for entries in self._table.values():
            for a, b in entries.items():
                words.update(a.split())
                words.update(b.split())
        words.update(_LOCATION_WORDS)
        words.update(_LOCATION_SPECIAL)
        return words


DEFAULT_OPPOSITES = OppositeMap()

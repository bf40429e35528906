"""General class descriptions for the photographic dataset families.

Each family has five hand-written descriptions; one is drawn per prompt
whenever a template uses the general-class-info slot.
"""
from __future__ import annotations

GENERAL_DESCRIPTIONS: dict[str, tuple[str, ...]] = {
    "endoscopy": (
        "a projecting growth of tissue",
        "often a bumpy flesh in rectum",
        "a small lump in the lining of colon",
        "a tissue growth that often resemble mushroom-like stalks",
        "an abnormal growth of tissues projecting from a mucous membrane",
    ),
    "isic": (
        "a spot with dark speckles",
        "a spot with irregular texture",
        "a dark sore with irregular texture",
        "an irregular sore with speckles",
        "a rough wound on skin",
    ),
    "dfu": (
        "a wound in foot and toes",
        "a sore in foot and toes",
        "a sore in skin of foot and toe",
        "an abnormality in foot and toes",
        "an open sore or lesion in foot and toes",
    ),
}


def bank_for(family: str) -> tuple[str, ...]:
    try:
        return GENERAL_DESCRIPTIONS[family]
    except KeyError:
        raise KeyError(f"no general-description bank for family {family!r}") from None

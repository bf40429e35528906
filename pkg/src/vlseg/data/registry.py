"""Descriptors for the eleven benchmark datasets."""
from __future__ import annotations

from dataclasses import dataclass, field

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    category: str  # radiology | non-radiology
    modality: str
    organ: str
    classes: tuple[str, ...]
    splits: dict[str, int] = field(hash=False)
    family: str
    test_only: bool = False

    def __post_init__(self):
        if set(self.splits) != set(SPLITS):
            raise ValueError(f"{self.name}: splits must define {SPLITS}")
        if self.test_only and (self.splits["train"] or self.splits["val"]):
            raise ValueError(f"{self.name}: test-only datasets have empty train/val")

    @property
    def is_multiclass(self) -> bool:
        return len(self.classes) > 1

    def default_class_table(self) -> dict[str, int]:
        return {name: i + 1 for i, name in enumerate(self.classes)}


def _d(name, category, modality, organ, classes, counts, family, test_only=False):
    train, val, test = counts
    return DatasetDescriptor(
        name, category, modality, organ, tuple(classes),
        {"train": train, "val": val, "test": test}, family, test_only,
    )


CHEXLOCALIZE_CLASSES = (
    "Atelectasis", "Cardiomegaly", "Consolidation", "Edema", "Enlarged Cardiomediastinum",
    "Lung Lesion", "Lung Opacity", "Pleural Effusion", "Pneumothorax", "Support Devices",
)

DATASETS: dict[str, DatasetDescriptor] = {
    d.name: d
    for d in (
        _d("kvasir_seg", "non-radiology", "endoscopy", "colon", ["polyp"], (800, 100, 100), "endoscopy"),
        _d("clinicdb", "non-radiology", "endoscopy", "colon", ["polyp"], (490, 61, 61), "endoscopy"),
        _d("bkai", "non-radiology", "endoscopy", "colon", ["polyp"], (800, 100, 100), "endoscopy"),
        _d("etis", "non-radiology", "endoscopy", "colon", ["polyp"], (0, 0, 196), "endoscopy", True),
        _d("colondb", "non-radiology", "endoscopy", "colon", ["polyp"], (0, 0, 380), "endoscopy", True),
        _d("cvc300", "non-radiology", "endoscopy", "colon", ["polyp"], (0, 0, 60), "endoscopy", True),
        _d("isic", "non-radiology", "photography", "skin", ["skin melanoma"], (810, 90, 379), "isic"),
        _d("dfu", "non-radiology", "photography", "foot", ["foot ulcer"], (1600, 200, 200), "dfu"),
        _d(
            "camus", "radiology", "ultrasound", "heart",
            ["Myocardium", "Left ventricular cavity", "Left atrium cavity"], (4800, 600, 600), "camus",
        ),
        _d("busi", "radiology", "ultrasound", "breast", ["tumor"], (624, 78, 78), "busi"),
        _d("chexlocalize", "radiology", "x-ray", "chest", CHEXLOCALIZE_CLASSES, (1279, 446, 452), "chexlocalize"),
    )
}

ALIASES = {
    "kvasir-seg": "kvasir_seg", "kvasir": "kvasir_seg", "clinic_db": "clinicdb", "cvc-clinicdb": "clinicdb",
    "cvc-colondb": "colondb", "cvc_colondb": "colondb", "cvc-300": "cvc300", "isic2016": "isic",
    "isic_2016": "isic", "dfu2022": "dfu", "dfu_2022": "dfu",
}

ENDOSCOPY = tuple(n for n, d in DATASETS.items() if d.family == "endoscopy")
ENDOSCOPY_TRAINABLE = tuple(n for n in ENDOSCOPY if not DATASETS[n].test_only)
NON_RADIOLOGY_TRAINABLE = tuple(
    n for n, d in DATASETS.items() if d.category == "non-radiology" and not d.test_only
)
RADIOLOGY = tuple(n for n, d in DATASETS.items() if d.category == "radiology")


def get_descriptor(name: str) -> DatasetDescriptor:
    key = name.lower()
    key = ALIASES.get(key, key)
    try:
        return DATASETS[key]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; known: {', '.join(DATASETS)}") from None

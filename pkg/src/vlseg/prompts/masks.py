"""Number, size and location attributes derived from binary masks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .attributes import AttributeKey, AttributeSet, Provenance

NUMBER_WORDS = ("no", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten")

GRID_NAMES_3X3 = (
    ("top left", "top", "top right"),
    ("left", "center", "right"),
    ("bottom left", "bottom", "bottom right"),
)

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True)
class ExtractionConfig:
    # area_ratio < small_max -> small, < medium_max -> medium, else large
    small_max: float = 0.10
    medium_max: float = 0.30
    grid: tuple[int, int] = (3, 3)
    connectivity: int = 8
    min_component_fraction: float = 0.001

    def __post_init__(self):
        if not 0.0 < self.small_max <= self.medium_max:
            raise ValueError("size thresholds must satisfy 0 < small_max <= medium_max")
        if self.connectivity not in _STRUCTURES:
            raise ValueError("connectivity must be 4 or 8")
        if min(self.grid) < 1:
            raise ValueError("grid must have at least one cell")


@dataclass(frozen=True)
class Component:
    area: int
    centroid: tuple[float, float]  # (row, col) in pixel-centre coordinates
    location: str


@dataclass(frozen=True)
class MaskDerivedAttributes:
    component_count: int
    number_word: str
    size_word: str
    location_words: tuple[str, ...]
    area_ratio: float
    components: tuple[Component, ...] = field(default=(), repr=False)

    def to_attributes(self) -> AttributeSet:
        values: dict[AttributeKey, object] = {AttributeKey.NUMBER: self.number_word}
        if self.component_count:
            values[AttributeKey.SIZE] = self.size_word
        if self.location_words:
            values[AttributeKey.LOCATION] = self.location_words
        return AttributeSet(values, Provenance.MASK_DERIVED)


def _as_binary(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("degenerate mask")
    if arr.dtype != bool:
        if not ((arr == 0) | (arr == 1)).all():
            raise ValueError(f"mask values must be 0/1, got {np.unique(arr)[:8].tolist()}")
    return arr.astype(bool)


def label_components(mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected foreground regions in raster order of first pixel."""
    binary = _as_binary(mask)
    if connectivity not in _STRUCTURES:
        raise ValueError("connectivity must be 4 or 8")
    labels, count = ndimage.label(binary, structure=_STRUCTURES[connectivity])
    return labels, int(count)


def count_components(mask, connectivity: int = 8) -> int:
    return label_components(mask, connectivity)[1]


def number_word(count: int) -> str:
    if count < 0:
        raise ValueError("count must be nonnegative")
    return NUMBER_WORDS[count] if count < len(NUMBER_WORDS) else "many"


def size_word(area_ratio: float, config: ExtractionConfig = ExtractionConfig()) -> str:
    if area_ratio <= 0.0:
        return "none"
    if area_ratio < config.small_max:
        return "small"
    if area_ratio < config.medium_max:
        return "medium"
    return "large"


def grid_cell_name(row: float, col: float, shape: tuple[int, int], grid=(3, 3)) -> str:
    """Name of the grid cell containing the point (row, col)."""
    h, w = shape
    n_rows, n_cols = grid
    r = min(int((row + 0.5) / h * n_rows), n_rows - 1)
    c = min(int((col + 0.5) / w * n_cols), n_cols - 1)
    if grid == (3, 3):
        return GRID_NAMES_3X3[r][c]
    return f"row {r + 1} column {c + 1}"


def extract_mask_attributes(mask, config: ExtractionConfig = ExtractionConfig()) -> MaskDerivedAttributes:
    binary = _as_binary(mask)
    labels, count = label_components(binary, config.connectivity)
    total = binary.size
    area_ratio = float(binary.sum()) / total

    min_area = config.min_component_fraction * total
    components: list[Component] = []
    if count:
        index = np.arange(1, count + 1)
        areas = ndimage.sum_labels(binary, labels, index)
        centroids = ndimage.center_of_mass(binary, labels, index)
        for area, (r, c) in zip(areas, centroids):
            if area < min_area:
                continue
            name = grid_cell_name(r, c, binary.shape, config.grid)
            components.append(Component(int(area), (float(r), float(c)), name))

    locations: list[str] = []
    for comp in components:
        if comp.location not in locations:
            locations.append(comp.location)

    return MaskDerivedAttributes(
        component_count=len(components),
        number_word=number_word(len(components)),
        size_word=size_word(area_ratio, config) if components else "none",
        location_words=tuple(locations),
        area_ratio=area_ratio,
        components=tuple(components),
    )

"""Resize/normalise model inputs and restore predictions to the original size."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


@dataclass(frozen=True)
class InputSpec:
    side: int
    mean: tuple[float, float, float] = CLIP_MEAN
    std: tuple[float, float, float] = CLIP_STD


CLIPSEG_INPUT = InputSpec(352)
CRIS_INPUT = InputSpec(416)
BIOMEDCLIP_INPUT = InputSpec(224)


def preprocess(image: np.ndarray, spec: InputSpec) -> torch.Tensor:
    """H x W x 3 uint8 image -> 3 x side x side standardized float tensor."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected a 3-channel H x W x 3 image, got shape {image.shape}")
    x = torch.from_numpy(np.array(image, dtype=np.float32)).permute(2, 0, 1).div_(255.0)
    if x.shape[1:] != (spec.side, spec.side):
        x = F.interpolate(x[None], size=(spec.side, spec.side), mode="bilinear", align_corners=False)[0]
    mean = torch.tensor(spec.mean).view(3, 1, 1)
    std = torch.tensor(spec.std).view(3, 1, 1)
    return (x - mean) / std


def resize_mask(mask: np.ndarray, side: int) -> torch.Tensor:
    """Nearest-neighbour resize of a binary mask to side x side (float tensor)."""
    m = torch.from_numpy(np.array(mask, dtype=np.float32))[None, None]
    if m.shape[-2:] != (side, side):
        m = F.interpolate(m, size=(side, side), mode="nearest")
    return m[0]


def restore(pred: torch.Tensor | np.ndarray, size: tuple[int, int]) -> torch.Tensor:
    """Bilinearly resize a (..., h, w) map of logits back to ``size``."""
    t = torch.as_tensor(pred)
    lead = t.shape[:-2]
    flat = t.reshape(-1, 1, *t.shape[-2:])
    if tuple(flat.shape[-2:]) != tuple(size):
        flat = F.interpolate(flat, size=tuple(size), mode="bilinear", align_corners=False)
    return flat.reshape(*lead, *size)

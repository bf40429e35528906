"""Dice score and original-resolution mask prediction."""
from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from ..data.transforms import preprocess, restore

THRESHOLD = 0.5


def dice_score(pred: np.ndarray, gt: np.ndarray, empty: float = 1.0) -> float:
    """2|P & G| / (|P| + |G|) for binary masks; ``empty`` when both are empty."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    p = pred.astype(bool)
    g = gt.astype(bool)
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return float(empty)
    return 2.0 * int(np.logical_and(p, g).sum()) / total


def binarize(logits: torch.Tensor) -> torch.Tensor:
    # strict: a probability of exactly 0.5 is background
    return torch.sigmoid(logits) > THRESHOLD


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


@torch.no_grad()
def predict_logits(
    model: nn.Module, images: Sequence[np.ndarray], prompts: Sequence[str], batch_size: int = 32
) -> list[torch.Tensor]:
    """Logits restored to each image's original H x W."""
    if len(images) != len(prompts):
        raise ValueError(f"{len(images)} images but {len(prompts)} prompts")
    was_training = model.training
    model.eval()
    spec = model.input_spec
    out: list[torch.Tensor] = []
    try:
        for sl in _chunks(len(images), batch_size):
            x = torch.stack([preprocess(im, spec) for im in images[sl]])
            logits = model(x, list(prompts[sl]))[:, 0].float()
            for lg, im in zip(logits, images[sl]):
                out.append(restore(lg, im.shape[:2]))
    finally:
        model.train(was_training)
    return out


def predict_masks(
    model: nn.Module, images: Sequence[np.ndarray], prompts: Sequence[str], batch_size: int = 32
) -> list[np.ndarray]:
    """Binary uint8 masks at original resolution."""
    return [binarize(lg).numpy().astype(np.uint8) for lg in predict_logits(model, images, prompts, batch_size)]


def predict_mask(model: nn.Module, image: np.ndarray, prompt: str) -> np.ndarray:
    """preprocess -> forward -> bilinear restore of logits -> sigmoid > 0.5."""
    return predict_masks(model, [image], [prompt])[0]


def triplet_dice(model: nn.Module, triplets, prompts: Sequence[str] | None = None, batch_size: int = 32) -> list[float]:
    """Per-triplet Dice using each triplet's prompt unless ``prompts`` overrides it."""
    prompts = [t.prompt for t in triplets] if prompts is None else list(prompts)
    preds = predict_masks(model, [t.image for t in triplets], prompts, batch_size)
    return [dice_score(p, t.mask) for p, t in zip(preds, triplets)]

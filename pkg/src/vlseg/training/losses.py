from __future__ import annotations

import torch

PROB_EPS = 1e-7


def _check(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def dice_loss(probs: torch.Tensor, target: torch.Tensor, smooth: float = 1.0) -> torch.Tensor:
    """1 - (2 sum(p t) + s) / (sum(p) + sum(t) + s), per sample, averaged over the batch.

    The first dimension is the batch; a 1-D input counts as one sample.
    """
    _check(probs, target)
    if probs.dim() == 1:
        probs, target = probs[None], target[None]
    p = probs.flatten(1)
    t = target.to(p.dtype).flatten(1)
    num = 2.0 * (p * t).sum(1) + smooth
    den = p.sum(1) + t.sum(1) + smooth
    return (1.0 - num / den).mean()


def bce_from_logits(logits: torch.Tensor, target: torch.Tensor, eps: float = PROB_EPS) -> torch.Tensor:
    _check(logits, target)
    p = torch.sigmoid(logits).clamp(eps, 1.0 - eps)
    t = target.to(p.dtype)
    return -(t * torch.log(p) + (1.0 - t) * torch.log1p(-p)).mean()


def combined_loss(
    logits: torch.Tensor, target: torch.Tensor, bce_weight: float = 0.2, smooth: float = 1.0
) -> torch.Tensor:
    """Dice loss on sigmoid probabilities plus weighted binary cross-entropy."""
    return dice_loss(torch.sigmoid(logits), target, smooth) + bce_weight * bce_from_logits(logits, target)


def dice_only_loss(logits: torch.Tensor, target: torch.Tensor, smooth: float = 1.0) -> torch.Tensor:
    return dice_loss(torch.sigmoid(logits), target, smooth)

"""Aggregators that condition vision activations on the prompt, and the decoder."""
from __future__ import annotations

import torch
import torch.nn as nn

from .encoders import TextEncoding, VisionFeatures
from .layers import Block, CrossAttention

SENTENCE_LEVEL = "sentence_level"
TOKEN_LEVEL = "token_level"


class FiLM(nn.Module):
    """Feature-wise affine modulation from a conditioning vector."""

    def __init__(self, cond_dim: int, feat_dim: int):
        super().__init__()
        self.mul = nn.Linear(cond_dim, feat_dim)
        self.add = nn.Linear(cond_dim, feat_dim)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        return self.mul(cond)[:, None, :] * x + self.add(cond)[:, None, :]


class SentenceAggregator(nn.Module):
    mode = SENTENCE_LEVEL

    def __init__(self, n_skips: int, cond_dim: int, feat_dim: int):
        super().__init__()
        self.films = nn.ModuleList(FiLM(cond_dim, feat_dim) for _ in range(n_skips))

    def forward(self, vision: VisionFeatures, text: TextEncoding) -> list[torch.Tensor]:
        _check(vision, text, len(self.films), self.films[0].mul.in_features, "pooled", text.pooled.shape[-1])
        return [film(skip, text.pooled) for film, skip in zip(self.films, vision.skips)]


class TokenAggregator(nn.Module):
    """Every token can reach every pixel through cross-attention."""

    mode = TOKEN_LEVEL

    def __init__(self, n_skips: int, text_dim: int, feat_dim: int, heads: int, zero_init: bool = False):
        super().__init__()
        self.fusions = nn.ModuleList(
            CrossAttention(feat_dim, text_dim, heads, zero_init) for _ in range(n_skips)
        )

    def forward(self, vision: VisionFeatures, text: TextEncoding) -> list[torch.Tensor]:
        _check(vision, text, len(self.fusions), self.fusions[0].kv.in_features, "tokens", text.tokens.shape[-1])
        return [fuse(skip, text.tokens, text.mask) for fuse, skip in zip(self.fusions, vision.skips)]


def _check(vision, text, n_expected, text_dim, field, got_dim):
    if len(vision.skips) != n_expected:
        raise ValueError(f"aggregator expects {n_expected} skip activations, got {len(vision.skips)}")
    if got_dim != text_dim:
        raise ValueError(f"aggregator layer 0: text {field} dim {got_dim} != expected {text_dim}")


class Decoder(nn.Module):
    """Reduce, sum and refine conditioned activations, then upsample.

    Skips are consumed deepest first. The logit head is either a 1x1 conv
    or a text-to-pixel product whose kernel is generated from the sentence
    vector.
    """

    def __init__(
        self,
        n_skips: int,
        vision_dim: int,
        dim: int,
        heads: int,
        grid: int,
        upsample: int,
        cond_dim: int,
        text_pixel_head: bool = False,
        mlp_ratio: float = 2.0,
    ):
        super().__init__()
        self.grid = grid
        self.reduces = nn.ModuleList(nn.Linear(vision_dim, dim) for _ in range(n_skips))
        self.blocks = nn.ModuleList(Block(dim, heads, mlp_ratio) for _ in range(n_skips))
        out_dim = max(1, dim // 2)
        self.up = nn.Sequential(nn.ConvTranspose2d(dim, out_dim, upsample, stride=upsample), nn.GELU())
        self.text_pixel_head = text_pixel_head
        if text_pixel_head:
            self.kernel = nn.Linear(cond_dim, out_dim + 1)
        else:
            self.head = nn.Conv2d(out_dim, 1, 1)

    def forward(self, stack: list[torch.Tensor], pooled: torch.Tensor) -> torch.Tensor:
        if len(stack) != len(self.reduces):
            raise ValueError(f"decoder expects {len(self.reduces)} activations, got {len(stack)}")
        a = None
        for i in reversed(range(len(stack))):
            reduced = self.reduces[i](stack[i])
            a = self.blocks[i](reduced if a is None else a + reduced)
        b, n, d = a.shape
        fmap = a.transpose(1, 2).reshape(b, d, self.grid, self.grid)
        feat = self.up(fmap)
        if not self.text_pixel_head:
            return self.head(feat)
        kernel = self.kernel(pooled)
        logits = torch.einsum("bchw,bc->bhw", feat, kernel[:, :-1]) + kernel[:, -1, None, None]
        return logits[:, None]

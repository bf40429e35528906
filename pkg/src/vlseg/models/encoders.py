"""Toy text and image encoders standing in for CLIP-style backbones."""
from __future__ import annotations

import re
import warnings
import zlib
from dataclasses import dataclass

import torch
import torch.nn as nn

from .layers import Block, causal_mask, init_embedding

_WORD = re.compile(r"\w+(?:-\w+)*|[^\w\s]")


class HashTokenizer:
    """Lower-cased word tokenizer with a hashed vocabulary.

    Every sequence is wrapped in begin/end tokens, so the empty prompt
    encodes to exactly two ids.
    """

    PAD, BOS, EOS = 0, 1, 2
    N_SPECIAL = 3

    def __init__(self, vocab_size: int = 4096, context_length: int = 32):
        if vocab_size <= self.N_SPECIAL:
            raise ValueError("vocab_size must exceed the number of special tokens")
        if context_length < 2:
            raise ValueError("context_length must hold the begin and end tokens")
        self.vocab_size = vocab_size
        self.context_length = context_length

    def words(self, text: str) -> list[str]:
        return _WORD.findall(text.lower())

    def token_id(self, word: str) -> int:
        return self.N_SPECIAL + zlib.crc32(word.encode()) % (self.vocab_size - self.N_SPECIAL)

    def encode(self, text: str) -> list[int]:
        ids = [self.token_id(w) for w in self.words(text)]
        room = self.context_length - 2
        if len(ids) > room:
            warnings.warn(
                f"prompt of {len(ids)} tokens truncated to context length {self.context_length}",
                stacklevel=3,
            )
            ids = ids[:room]
        return [self.BOS, *ids, self.EOS]

    def batch(self, texts: list[str], device=None) -> tuple[torch.Tensor, torch.Tensor]:
        encoded = [self.encode(t) for t in texts]
        length = max(len(e) for e in encoded)
        ids = torch.full((len(texts), length), self.PAD, dtype=torch.long)
        for i, e in enumerate(encoded):
            ids[i, : len(e)] = torch.tensor(e)
        mask = ids != self.PAD
        return ids.to(device), mask.to(device)


@dataclass
class TextEncoding:
    tokens: torch.Tensor  # B x L x Dt
    pooled: torch.Tensor  # B x Dj
    mask: torch.Tensor  # B x L, True for real tokens


@dataclass
class VisionFeatures:
    final: torch.Tensor  # B x N x Dv, N = grid * grid
    skips: list[torch.Tensor]
    grid: int

    @property
    def feature_map(self) -> torch.Tensor:
        b, _, d = self.final.shape
        return self.final.view(b, self.grid, self.grid, d)


class TextEncoder(nn.Module):
    """Causal transformer; the sentence vector is the projected end token."""

    def __init__(self, vocab_size, context_length, dim, layers, heads, joint_dim, mlp_ratio=2.0):
        super().__init__()
        self.token_embedding = nn.Embedding(vocab_size, dim)
        self.pos_embedding = nn.Parameter(torch.empty(context_length, dim))
        self.blocks = nn.ModuleList(Block(dim, heads, mlp_ratio) for _ in range(layers))
        self.norm = nn.LayerNorm(dim)
        self.proj = nn.Linear(dim, joint_dim, bias=False)
        self.reset_parameters()

    def reset_parameters(self):
        init_embedding(self.pos_embedding, 0.01)
        init_embedding(self.token_embedding.weight)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> TextEncoding:
        n = ids.shape[1]
        x = self.token_embedding(ids) + self.pos_embedding[:n]
        attn = causal_mask(n, ids.device)
        for block in self.blocks:
            x = block(x, attn)
        x = self.norm(x)
        eos = mask.sum(dim=1) - 1
        pooled = self.proj(x[torch.arange(ids.shape[0]), eos])
        return TextEncoding(x, pooled, mask)


class VisionEncoder(nn.Module):
    """Patch-embedding transformer exposing intermediate activations."""

    def __init__(self, side, patch, dim, layers, heads, extract_layers, mlp_ratio=2.0):
        super().__init__()
        if side % patch:
            raise ValueError(f"input side {side} not divisible by patch {patch}")
        if any(i < 0 or i >= layers for i in extract_layers):
            raise ValueError(f"extract layers {extract_layers} out of range for {layers} layers")
        self.grid = side // patch
        self.extract_layers = tuple(extract_layers)
        self.patch_embed = nn.Conv2d(3, dim, patch, stride=patch)
        self.pos_embedding = nn.Parameter(torch.empty(self.grid * self.grid, dim))
        self.blocks = nn.ModuleList(Block(dim, heads, mlp_ratio) for _ in range(layers))
        self.norm = nn.LayerNorm(dim)
        self.reset_parameters()

    def reset_parameters(self):
        init_embedding(self.pos_embedding)

    def forward(self, images: torch.Tensor) -> VisionFeatures:
        x = self.patch_embed(images).flatten(2).transpose(1, 2) + self.pos_embedding
        skips = []
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i in self.extract_layers:
                skips.append(x)
        return VisionFeatures(self.norm(x), skips, self.grid)

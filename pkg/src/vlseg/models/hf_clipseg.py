"""Adapter for pretrained CLIPSeg weights in Hugging Face format (optional extra)."""
from __future__ import annotations

import json
from pathlib import Path

import torch
import torch.nn as nn

from ..data.transforms import CLIPSEG_INPUT, InputSpec


def _spec_from_preprocessor(path: Path) -> InputSpec | None:
    """Input side and normalisation from a saved ``preprocessor_config.json``."""
    cfg_file = path / "preprocessor_config.json"
    if not cfg_file.exists():
        return None
    cfg = json.loads(cfg_file.read_text())
    size = cfg.get("size", CLIPSEG_INPUT.side)
    if isinstance(size, dict):
        size = size.get("height") or size.get("shortest_edge") or CLIPSEG_INPUT.side
    mean = tuple(cfg.get("image_mean", CLIPSEG_INPUT.mean))
    std = tuple(cfg.get("image_std", CLIPSEG_INPUT.std))
    return InputSpec(int(size), mean, std)


class PretrainedCLIPSeg(nn.Module):
    """Wraps ``CLIPSegForImageSegmentation`` behind the (images, prompts) -> logits interface."""

    input_spec: InputSpec = CLIPSEG_INPUT

    def __init__(self, path: str | Path):
        super().__init__()
        try:
            from transformers import AutoTokenizer, CLIPSegForImageSegmentation
        except ImportError as err:  # pragma: no cover - depends on environment
            raise ImportError("pretrained CLIPSeg needs the 'transformers' package") from err
        self.net = CLIPSegForImageSegmentation.from_pretrained(str(path))
        self.tokenizer = AutoTokenizer.from_pretrained(str(path))
        self.net.eval()
        self.input_spec = _spec_from_preprocessor(Path(path)) or CLIPSEG_INPUT

    def forward(self, images: torch.Tensor, prompts: list[str] | str) -> torch.Tensor:
        if isinstance(prompts, str):
            prompts = [prompts] * images.shape[0]
        tok = self.tokenizer(list(prompts), padding=True, truncation=True, return_tensors="pt")
        out = self.net(input_ids=tok["input_ids"], attention_mask=tok["attention_mask"], pixel_values=images)
        logits = out.logits
        if logits.dim() == 2:
            logits = logits[None]
        return logits[:, None]

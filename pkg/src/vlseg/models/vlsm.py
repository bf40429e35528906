"""The four VLSM variants assembled from encoders, aggregator and decoder."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import torch
import torch.nn as nn

from ..data.transforms import CLIP_MEAN, CLIP_STD, InputSpec
from .encoders import HashTokenizer, TextEncoder, TextEncoding, VisionEncoder, VisionFeatures
from .fusion import SENTENCE_LEVEL, TOKEN_LEVEL, Decoder, SentenceAggregator, TokenAggregator

VARIANTS = ("clipseg", "cris", "biomedclipseg", "biomedclipseg_d")
CLIPSEG_FAMILY = ("clipseg", "biomedclipseg", "biomedclipseg_d")

# Which pretrained backbone and decoder each variant starts from; None = random init.
BACKBONE = {"clipseg": "clip", "cris": "clip", "biomedclipseg": "biomedclip", "biomedclipseg_d": "biomedclip"}
DECODER_SOURCE = {"clipseg": "clipseg", "cris": "cris", "biomedclipseg": None, "biomedclipseg_d": "clipseg"}


@dataclass(frozen=True)
class VLSMConfig:
    variant: str = "clipseg"
    conditioning: str | None = None
    input_side: int = 64
    patch: int = 8
    context_length: int = 32
    vocab_size: int = 4096
    text_dim: int = 32
    text_layers: int = 2
    text_heads: int = 4
    vision_dim: int = 32
    vision_layers: int = 2
    vision_heads: int = 4
    joint_dim: int = 32
    decoder_dim: int = 16
    decoder_heads: int = 2
    mlp_ratio: float = 2.0
    extract_layers: tuple[int, ...] = (0, 1)
    freeze_text: bool = False
    freeze_vision: bool = False
    mean: tuple[float, float, float] = CLIP_MEAN
    std: tuple[float, float, float] = CLIP_STD
    provider: str = "toy"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        expected = TOKEN_LEVEL if self.variant == "cris" else SENTENCE_LEVEL
        if self.conditioning is None:
            object.__setattr__(self, "conditioning", expected)
        elif self.conditioning != expected:
            raise ValueError(f"{self.variant} requires {expected} conditioning, got {self.conditioning}")
        if self.patch % 4 or self.input_side % self.patch:
            raise ValueError("patch must be a multiple of 4 and divide input_side")
        object.__setattr__(self, "extract_layers", tuple(self.extract_layers))
        object.__setattr__(self, "mean", tuple(self.mean))
        object.__setattr__(self, "std", tuple(self.std))

    @property
    def output_side(self) -> int:
        return self.input_side // 4

    @property
    def input_spec(self) -> InputSpec:
        return InputSpec(self.input_side, self.mean, self.std)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> VLSMConfig:
        return cls(**data)

    def with_(self, **changes) -> VLSMConfig:
        return replace(self, **changes)


def toy_config(variant: str = "clipseg", **overrides) -> VLSMConfig:
    """Desk-scale configuration: 2-layer encoders, decoder width 16."""
    return VLSMConfig(variant=variant, **overrides)


def tiny_config(variant: str = "clipseg", **overrides) -> VLSMConfig:
    """Under-1k-parameter configuration for finite-difference gradient checks."""
    base = dict(
        input_side=8, patch=4, context_length=8, vocab_size=12, text_dim=4, text_layers=1, text_heads=1,
        vision_dim=4, vision_layers=1, vision_heads=1, joint_dim=4, decoder_dim=2, decoder_heads=1,
        mlp_ratio=1.0, extract_layers=(0,),
    )
    base.update(overrides)
    return VLSMConfig(variant=variant, **base)


# Published input geometry of the full-size models; dims follow ViT-B/16 backbones.
REFERENCE_CONFIGS = {
    "clipseg": dict(input_side=352, patch=16, context_length=77, vocab_size=49408, text_dim=512,
                    text_layers=12, text_heads=8, vision_dim=768, vision_layers=12, vision_heads=12,
                    joint_dim=512, decoder_dim=64, decoder_heads=4, mlp_ratio=4.0, extract_layers=(3, 6, 9),
                    provider="pretrained"),
    "cris": dict(input_side=416, patch=16, context_length=17, vocab_size=49408, text_dim=512,
                 text_layers=12, text_heads=8, vision_dim=768, vision_layers=12, vision_heads=12,
                 joint_dim=512, decoder_dim=256, decoder_heads=8, mlp_ratio=4.0, extract_layers=(3, 6, 9),
                 provider="pretrained"),
    "biomedclipseg": dict(input_side=224, patch=16, context_length=256, vocab_size=30522, text_dim=768,
                          text_layers=12, text_heads=12, vision_dim=768, vision_layers=12, vision_heads=12,
                          joint_dim=512, decoder_dim=64, decoder_heads=4, mlp_ratio=4.0,
                          extract_layers=(3, 6, 9), provider="pretrained"),
}
REFERENCE_CONFIGS["biomedclipseg_d"] = REFERENCE_CONFIGS["biomedclipseg"]


def reference_config(variant: str, **overrides) -> VLSMConfig:
    return VLSMConfig(variant=variant, **{**REFERENCE_CONFIGS[variant], **overrides})


class VLSM(nn.Module):
    """Text encoder + image encoder + aggregator + vision-language decoder."""

    def __init__(self, config: VLSMConfig):
        super().__init__()
        c = self.config = config
        self.tokenizer = HashTokenizer(c.vocab_size, c.context_length)
        self.text_encoder = TextEncoder(
            c.vocab_size, c.context_length, c.text_dim, c.text_layers, c.text_heads, c.joint_dim, c.mlp_ratio
        )
        self.vision_encoder = VisionEncoder(
            c.input_side, c.patch, c.vision_dim, c.vision_layers, c.vision_heads, c.extract_layers, c.mlp_ratio
        )
        n = len(c.extract_layers)
        if c.conditioning == SENTENCE_LEVEL:
            self.aggregator = SentenceAggregator(n, c.joint_dim, c.vision_dim)
        else:
            self.aggregator = TokenAggregator(n, c.text_dim, c.vision_dim, c.vision_heads)
        self.decoder = Decoder(
            n, c.vision_dim, c.decoder_dim, c.decoder_heads, c.input_side // c.patch, c.patch // 4,
            c.joint_dim, text_pixel_head=c.conditioning == TOKEN_LEVEL, mlp_ratio=c.mlp_ratio,
        )

    @property
    def input_spec(self) -> InputSpec:
        return self.config.input_spec

    @property
    def device(self) -> torch.device:
        return next(self.parameters()).device

    def component(self, name: str) -> nn.Module:
        """'text_encoder', 'vision_encoder' or 'decoder' (aggregator + decoder)."""
        if name == "decoder":
            return nn.ModuleDict({"aggregator": self.aggregator, "decoder": self.decoder})
        return getattr(self, name)

    def encode_text(self, prompts: str | list[str]) -> TextEncoding:
        if isinstance(prompts, str):
            prompts = [prompts]
        ids, mask = self.tokenizer.batch(list(prompts), self.device)
        return self.text_encoder(ids, mask)

    def encode_image(self, images: torch.Tensor) -> VisionFeatures:
        return self.vision_encoder(images)

    def aggregate(self, vision: VisionFeatures, text: TextEncoding) -> list[torch.Tensor]:
        return self.aggregator(vision, text)

    def decode(self, stack: list[torch.Tensor], text: TextEncoding) -> torch.Tensor:
        return self.decoder(stack, text.pooled)

    def forward(self, images: torch.Tensor, prompts: list[str] | str) -> torch.Tensor:
        """B x 3 x S x S images -> B x 1 x S/4 x S/4 logits."""
        if isinstance(prompts, str):
            prompts = [prompts] * images.shape[0]
        if len(prompts) != images.shape[0]:
            raise ValueError(f"{images.shape[0]} images but {len(prompts)} prompts")
        if images.shape[-2:] != (self.config.input_side, self.config.input_side):
            raise ValueError(f"expected {self.config.input_side}px inputs, got {tuple(images.shape[-2:])}")
        text = self.encode_text(list(prompts))
        vision = self.encode_image(images)
        return self.decode(self.aggregate(vision, text), text)

    def frozen_components(self) -> list[str]:
        out = []
        if self.config.freeze_text:
            out.append("text_encoder")
        if self.config.freeze_vision:
            out.append("vision_encoder")
        return out

    def apply_freeze(self) -> None:
        for name in ("text_encoder", "vision_encoder"):
            frozen = name in self.frozen_components()
            for p in getattr(self, name).parameters():
                p.requires_grad_(not frozen)


def build_variant(config: VLSMConfig, provider=None) -> VLSM:
    """Build ``config.variant`` and initialise each component from ``provider``.

    biomedclipseg gets a randomly initialised decoder (seeded by
    ``config.seed``); biomedclipseg_d copies the CLIPSeg decoder.
    """
    from .providers import ToyProvider

    provider = provider if provider is not None else ToyProvider(config.seed)
    model = VLSM(config)
    backbone = BACKBONE[config.variant]
    provider.initialize(model.text_encoder, f"{backbone}/text_encoder", config)
    provider.initialize(model.vision_encoder, f"{backbone}/vision_encoder", config)
    source = DECODER_SOURCE[config.variant]
    decoder = model.component("decoder")
    if source is None:
        ToyProvider(config.seed).initialize(decoder, "random/decoder", config)
    else:
        provider.initialize(decoder, f"{source}/decoder", config)
    model.apply_freeze()
    return model


def trainable_parameters(model: nn.Module) -> list[nn.Parameter]:
    return [p for p in model.parameters() if p.requires_grad]


def parameter_vector(module: nn.Module) -> torch.Tensor:
    return torch.cat([p.detach().reshape(-1) for p in module.parameters()])


COMPONENTS = ("text_encoder", "vision_encoder", "decoder")

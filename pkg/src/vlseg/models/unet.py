"""Image-only CNN baselines. Prompts are accepted and ignored."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.transforms import InputSpec

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class CNNConfig:
    arch: str = "unet"
    widths: tuple[int, ...] = (16, 32, 64)
    input_side: int = 64
    seed: int = 0
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(self.widths))
        object.__setattr__(self, "mean", tuple(self.mean))
        object.__setattr__(self, "std", tuple(self.std))
        if len(self.widths) < 2:
            raise ValueError("need at least two widths (one downsampling level)")
        if self.input_side % 2 ** (len(self.widths) - 1):
            raise ValueError("input_side must be divisible by 2**depth")

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def input_spec(self) -> InputSpec:
        return InputSpec(self.input_side, self.mean, self.std)

    def to_dict(self) -> dict:
        return asdict(self)


class DoubleConv(nn.Module):
    def __init__(self, in_c: int, out_c: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_c, out_c, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_c),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_c, out_c, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_c),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.net(x)


class UNet(nn.Module):
    def __init__(self, config: CNNConfig = CNNConfig()):
        super().__init__()
        self.config = config
        w = config.widths
        self.inc = DoubleConv(3, w[0])
        self.downs = nn.ModuleList(DoubleConv(w[i], w[i + 1]) for i in range(config.depth))
        self.ups = nn.ModuleList(
            nn.ConvTranspose2d(w[i + 1], w[i], 2, stride=2) for i in reversed(range(config.depth))
        )
        self.up_convs = nn.ModuleList(DoubleConv(2 * w[i], w[i]) for i in reversed(range(config.depth)))
        self.outc = nn.Conv2d(w[0], 1, 1)

    @property
    def input_spec(self) -> InputSpec:
        return self.config.input_spec

    @property
    def n_skips(self) -> int:
        return len(self.up_convs)

    def forward(self, images: torch.Tensor, prompts=None) -> torch.Tensor:
        if images.shape[-2:] != (self.config.input_side, self.config.input_side):
            raise ValueError(f"expected {self.config.input_side}px inputs, got {tuple(images.shape[-2:])}")
        x = self.inc(images)
        skips = []
        for down in self.downs:
            skips.append(x)
            x = down(F.max_pool2d(x, 2))
        for up, conv in zip(self.ups, self.up_convs):
            x = conv(torch.cat([skips.pop(), up(x)], dim=1))
        return self.outc(x)


BASELINES: dict[str, Callable[[CNNConfig], nn.Module]] = {"unet": UNet}


def register_baseline(name: str, factory: Callable[[CNNConfig], nn.Module]) -> None:
    """Plug in another image-only model (e.g. UNet++, DeepLabV3+)."""
    BASELINES[name] = factory


def build_baseline(config: CNNConfig) -> nn.Module:
    try:
        factory = BASELINES[config.arch]
    except KeyError:
        raise KeyError(f"unknown baseline {config.arch!r}; registered: {', '.join(BASELINES)}") from None
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        return factory(config)

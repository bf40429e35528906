"""Training hyperparameters, per-variant recipes and the search grid."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from ..models.vlsm import CLIPSEG_FAMILY, VARIANTS

OPTIMIZERS = ("adamw", "adam")
SCHEDULERS = ("plateau", "cosine", "constant")
LOSSES = ("combined", "dice")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-3
    batch_size: int = 128
    max_epochs: int = 1000
    early_stop_patience: int = 50
    plateau_patience: int = 5
    plateau_factor: float = 0.1
    min_lr: float = 0.0
    optimizer: str = "adamw"
    weight_decay: float = 1e-3
    scheduler: str = "plateau"
    loss: str = "combined"
    bce_weight: float = 0.2
    dice_smooth: float = 1.0
    seed: int = 0
    eval_batch_size: int = 32

    def __post_init__(self):
        for name in ("lr", "batch_size", "max_epochs", "early_stop_patience", "plateau_patience", "dice_smooth",
                     "eval_batch_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("weight_decay", "bce_weight", "min_lr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; expected one of {OPTIMIZERS}")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}; expected one of {SCHEDULERS}")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown training keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def with_(self, **changes) -> TrainConfig:
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise KeyError(f"unknown training keys: {', '.join(sorted(unknown))}")
        return replace(self, **changes)


def recipe_for(variant: str, **overrides) -> TrainConfig:
    """The finetuning recipe: AdamW, wd 1e-3, plateau x0.1 after 5 epochs."""
    if variant not in VARIANTS:
        raise KeyError(f"unknown variant {variant!r}")
    if variant in CLIPSEG_FAMILY:
        base = TrainConfig(lr=2e-3, batch_size=128, early_stop_patience=50)
    else:
        base = TrainConfig(lr=2e-5, batch_size=32, early_stop_patience=10)
    return base.with_(**overrides)


def baseline_recipe(**overrides) -> TrainConfig:
    """CNN baselines: Adam at 1e-3 on the Dice loss alone."""
    return TrainConfig(
        lr=1e-3, batch_size=32, early_stop_patience=20, optimizer="adam", weight_decay=0.0, loss="dice"
    ).with_(**overrides)


@dataclass(frozen=True)
class SearchGrid:
    """Hyperparameter search space explored before fixing the recipe."""

    optimizers: tuple[str, ...] = ("adam", "adamw")
    lr_range: tuple[float, float] = (1e-5, 1e-2)
    batch_sizes: tuple[int, ...] = (16, 32, 64, 128)
    schedulers: tuple[str, ...] = ("cosine", "constant", "plateau")
    lr_points: int = 4

    def __post_init__(self):
        lo, hi = self.lr_range
        if not 0 < lo <= hi:
            raise ValueError("lr_range must satisfy 0 < low <= high")
        for o in self.optimizers:
            if o not in OPTIMIZERS:
                raise ValueError(f"unknown optimizer {o!r}")
        for s in self.schedulers:
            if s not in SCHEDULERS:
                raise ValueError(f"unknown scheduler {s!r}")

    def learning_rates(self) -> list[float]:
        lo, hi = self.lr_range
        if self.lr_points == 1 or lo == hi:
            return [lo]
        return [float(v) for v in np.geomspace(lo, hi, self.lr_points)]

    def configs(self, base: TrainConfig) -> list[TrainConfig]:
        """Cartesian product over the grid, log-spaced over the LR range."""
        return [
            base.with_(optimizer=o, lr=lr, batch_size=b, scheduler=s)
            for o, lr, b, s in itertools.product(self.optimizers, self.learning_rates(), self.batch_sizes, self.schedulers)
        ]

    def sample(self, base: TrainConfig, n: int, seed: int = 0) -> list[TrainConfig]:
        """``n`` random configs with log-uniform learning rates."""
        rng = np.random.default_rng(seed)
        lo, hi = map(math.log, self.lr_range)
        return [
            base.with_(
                optimizer=str(rng.choice(self.optimizers)),
                lr=float(math.exp(rng.uniform(lo, hi))),
                batch_size=int(rng.choice(self.batch_sizes)),
                scheduler=str(rng.choice(self.schedulers)),
            )
            for _ in range(n)
        ]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> SearchGrid:
        data = dict(data)
        for key in ("optimizers", "lr_range", "batch_sizes", "schedulers"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class TrainingFile:
    """Parsed training config file: ``variant`` selects a recipe, ``train`` overrides it."""

    train: TrainConfig
    variant: str | None = None
    search: SearchGrid | None = None
    extra: dict = field(default_factory=dict)


def load_train_config(path: str | Path) -> TrainingFile:
    """Read a YAML or JSON file with keys ``variant``, ``train`` and ``search``.

    Example::

        variant: cris
        train: {max_epochs: 40, seed: 3}
        search: {batch_sizes: [16, 32]}
    """
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    data = dict(data)
    variant = data.pop("variant", None)
    overrides = data.pop("train", {}) or {}
    search = data.pop("search", None)
    if variant is None:
        train = TrainConfig.from_dict(overrides)
    elif variant == "unet":
        train = baseline_recipe(**overrides)
    else:
        train = recipe_for(variant, **overrides)
    return TrainingFile(train, variant, SearchGrid.from_dict(search) if search is not None else None, data)

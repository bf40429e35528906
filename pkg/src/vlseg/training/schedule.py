"""Learning-rate schedules and early stopping driven by per-epoch metrics."""
from __future__ import annotations

import math


class PlateauScheduler:
    """Multiply the LR by ``factor`` once ``patience`` epochs pass without a new minimum.

    The LR is always ``initial * factor**k`` for the number of reductions
    ``k`` so that repeated reductions do not accumulate rounding error.
    """

    def __init__(self, initial_lr: float, factor: float = 0.1, patience: int = 5, min_lr: float = 0.0):
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        if patience < 1:
            raise ValueError("patience must be positive")
        self.initial_lr = initial_lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.bad_epochs = 0
        self.reductions = 0

    @property
    def lr(self) -> float:
        return max(self.initial_lr * self.factor**self.reductions, self.min_lr)

    def step(self, metric: float, epoch: int | None = None) -> bool:
        """Record one epoch's metric; returns True if the LR was reduced."""
        if metric < self.best:
            self.best = metric
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience and self.lr > self.min_lr:
            self.reductions += 1
            self.bad_epochs = 0
            return True
        return False

    def state_dict(self) -> dict:
        return {"best": self.best, "bad_epochs": self.bad_epochs, "reductions": self.reductions}

    def load_state_dict(self, state: dict) -> None:
        self.best, self.bad_epochs, self.reductions = state["best"], state["bad_epochs"], state["reductions"]


class ConstantScheduler:
    def __init__(self, initial_lr: float, **_):
        self.initial_lr = initial_lr

    @property
    def lr(self) -> float:
        return self.initial_lr

    def step(self, metric: float, epoch: int | None = None) -> bool:
        return False

    def state_dict(self) -> dict:
        return {}

    def load_state_dict(self, state: dict) -> None:
        pass


class CosineScheduler:
    """Cosine annealing from the initial LR to ``min_lr`` over ``total_epochs``."""

    def __init__(self, initial_lr: float, total_epochs: int = 100, min_lr: float = 0.0, **_):
        self.initial_lr = initial_lr
        self.total_epochs = max(1, total_epochs)
        self.min_lr = min_lr
        self.epoch = 0

    @property
    def lr(self) -> float:
        t = min(self.epoch, self.total_epochs) / self.total_epochs
        return self.min_lr + 0.5 * (self.initial_lr - self.min_lr) * (1 + math.cos(math.pi * t))

    def step(self, metric: float, epoch: int | None = None) -> bool:
        self.epoch += 1
        return True

    def state_dict(self) -> dict:
        return {"epoch": self.epoch}

    def load_state_dict(self, state: dict) -> None:
        self.epoch = state["epoch"]


class EarlyStopping:
    """Stop once ``patience`` epochs pass without a new maximum."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError("patience must be positive")
        self.patience = patience
        self.best = -math.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if metric > self.best:
            self.best = metric
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience

    def state_dict(self) -> dict:
        return {"best": self.best, "bad_epochs": self.bad_epochs}

    def load_state_dict(self, state: dict) -> None:
        self.best, self.bad_epochs = state["best"], state["bad_epochs"]


def make_scheduler(name: str, initial_lr: float, *, factor=0.1, patience=5, total_epochs=100, min_lr=0.0):
    if name == "plateau":
        return PlateauScheduler(initial_lr, factor, patience, min_lr)
    if name == "constant":
        return ConstantScheduler(initial_lr)
    if name == "cosine":
        return CosineScheduler(initial_lr, total_epochs, min_lr)
    raise ValueError(f"unknown scheduler {name!r}; expected plateau, constant or cosine")

"""The finetuning loop: shuffled mini-batches, per-epoch validation, checkpoints."""
from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.datasets import SampleTriplet
from ..data.transforms import preprocess, resize_mask
from ..evaluation.metrics import triplet_dice
from ..models.checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .losses import combined_loss, dice_only_loss
from .schedule import EarlyStopping, make_scheduler

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "lr", "train_loss", "val_loss", "val_dice")

Validator = Callable[[nn.Module, Sequence[SampleTriplet], TrainConfig], "tuple[float, float]"]


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, lr: float, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}, lr {lr:g}")
        self.epoch, self.batch, self.lr, self.loss = epoch, batch, lr, loss


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    val_dice: float

    def row(self) -> dict:
        return {k: getattr(self, k) for k in HISTORY_COLUMNS}


@dataclass
class TrainState:
    epoch: int = 0
    lr: float = 0.0
    best_val_dice: float = -math.inf
    best_epoch: int = 0
    history: list[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False


@dataclass
class FitResult:
    state: TrainState
    best_path: Path | None
    last_path: Path | None
    # epochs already completed before this call (non-zero after a resume)
    start_epoch: int = 0

    @property
    def epochs_run(self) -> int:
        return self.state.epoch - self.start_epoch

    @property
    def history(self) -> list[EpochRecord]:
        return self.state.history


def loss_fn(config: TrainConfig) -> Callable[[torch.Tensor, torch.Tensor], torch.Tensor]:
    if config.loss == "combined":
        return lambda lg, t: combined_loss(lg, t, config.bce_weight, config.dice_smooth)
    return lambda lg, t: dice_only_loss(lg, t, config.dice_smooth)


class _Tensors:
    """Images and masks resized to the model's input side, computed once."""

    def __init__(self, triplets: Sequence[SampleTriplet], spec):
        self.images = torch.stack([preprocess(t.image, spec) for t in triplets])
        self.masks = torch.stack([resize_mask(t.mask, spec.side) for t in triplets])


def _at_input_side(logits: torch.Tensor, side: int) -> torch.Tensor:
    if logits.shape[-1] != side:
        logits = F.interpolate(logits, size=(side, side), mode="bilinear", align_corners=False)
    return logits


def batch_loss(model: nn.Module, images, masks, prompts, criterion) -> torch.Tensor:
    logits = _at_input_side(model(images, list(prompts)), images.shape[-1])
    return criterion(logits, masks)


@torch.no_grad()
def validate(model: nn.Module, triplets: Sequence[SampleTriplet], config: TrainConfig,
             cache: _Tensors | None = None) -> tuple[float, float]:
    """Mean val loss at input resolution and mean Dice at original resolution."""
    cache = cache or _Tensors(triplets, model.input_spec)
    criterion = loss_fn(config)
    was_training = model.training
    model.eval()
    total = 0.0
    try:
        for start in range(0, len(triplets), config.eval_batch_size):
            sl = slice(start, start + config.eval_batch_size)
            prompts = [t.prompt for t in triplets[sl]]
            n = len(prompts)
            total += float(batch_loss(model, cache.images[sl], cache.masks[sl], prompts, criterion)) * n
    finally:
        model.train(was_training)
    dice = triplet_dice(model, triplets, batch_size=config.eval_batch_size)
    return total / len(triplets), float(np.mean(dice))


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch])


def draw_prompts(triplets: Sequence[SampleTriplet], index: np.ndarray, rng: np.random.Generator) -> list[str]:
    out = []
    for i in index:
        t = triplets[i]
        out.append(t.prompt_options[rng.integers(len(t.prompt_options))] if t.prompt_options else t.prompt)
    return out


def make_optimizer(params, config: TrainConfig) -> torch.optim.Optimizer:
    cls = torch.optim.AdamW if config.optimizer == "adamw" else torch.optim.Adam
    return cls(params, lr=config.lr, weight_decay=config.weight_decay)


def write_history(path: Path, history: Sequence[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
        writer.writeheader()
        for rec in history:
            writer.writerow(rec.row())


def read_history(path: str | Path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        return [
            EpochRecord(int(r["epoch"]), float(r["lr"]), float(r["train_loss"]), float(r["val_loss"]),
                        float(r["val_dice"]))
            for r in csv.DictReader(fh)
        ]


def fit(
    model: nn.Module,
    train: Sequence[SampleTriplet],
    val: Sequence[SampleTriplet],
    config: TrainConfig,
    out_dir: str | Path | None = None,
    resume: bool = False,
    validator: Validator | None = None,
) -> FitResult:
    """Train ``model`` in place and leave it holding the best-val-Dice weights.

    The LR drops by ``plateau_factor`` when val loss stalls for
    ``plateau_patience`` epochs; training stops when val Dice stalls for
    ``early_stop_patience`` epochs. With ``out_dir`` set, ``best.pt``,
    ``last.pt`` (which also carries optimizer state for ``resume``) and
    ``history.csv`` are written there.
    """
    train, val = list(train), list(val)
    if not train:
        raise ValueError("training split is empty")
    if not val:
        raise ValueError("validation split is empty")
    params = [p for p in model.parameters() if p.requires_grad]
    if not params:
        raise ValueError("model has no trainable parameters")

    out = Path(out_dir) if out_dir is not None else None
    ckpt_dir = out / "checkpoints" if out is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(config.seed)
    optimizer = make_optimizer(params, config)
    scheduler = make_scheduler(
        config.scheduler, config.lr, factor=config.plateau_factor, patience=config.plateau_patience,
        total_epochs=config.max_epochs, min_lr=config.min_lr,
    )
    stopper = EarlyStopping(config.early_stop_patience)
    criterion = loss_fn(config)
    state = TrainState(lr=scheduler.lr)
    best_weights = copy.deepcopy(model.state_dict())

    last_path = ckpt_dir / "last.pt" if ckpt_dir is not None else None
    best_path = ckpt_dir / "best.pt" if ckpt_dir is not None else None
    if resume and last_path is not None and last_path.exists():
        payload = load_checkpoint(last_path)
        model.load_state_dict(payload["state_dict"])
        optimizer.load_state_dict(payload["optimizer"])
        scheduler.load_state_dict(payload["scheduler"])
        stopper.load_state_dict(payload["early_stop"])
        state.epoch = payload["epoch"]
        state.best_val_dice = payload["best_val_dice"]
        state.best_epoch = payload["best_epoch"]
        state.stopped_early = payload.get("stopped_early", False)
        state.history = [EpochRecord(**r) for r in payload["history"]]
        if best_path.exists():
            best_weights = load_checkpoint(best_path)["state_dict"]
        log.info("resumed from %s at epoch %d", last_path, state.epoch)

    start_epoch = state.epoch
    spec = model.input_spec
    train_cache = _Tensors(train, spec)
    val_cache = _Tensors(val, spec)
    run_validation = validator or (lambda m, v, c: validate(m, v, c, val_cache))

    while state.epoch < config.max_epochs and not state.stopped_early:
        epoch = state.epoch + 1
        lr = scheduler.lr
        for group in optimizer.param_groups:
            group["lr"] = lr
        rng = epoch_rng(config.seed, epoch)
        order = rng.permutation(len(train))
        model.train()
        running, seen = 0.0, 0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start:start + config.batch_size]
            prompts = draw_prompts(train, idx, rng)
            t_idx = torch.from_numpy(idx)
            loss = batch_loss(model, train_cache.images[t_idx], train_cache.masks[t_idx], prompts, criterion)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, b, lr, loss.detach().item())
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            running += loss.detach().item() * len(idx)
            seen += len(idx)

        val_loss, val_dice = run_validation(model, val, config)
        record = EpochRecord(epoch, lr, running / seen, float(val_loss), float(val_dice))
        state.history.append(record)
        state.epoch = epoch
        log.debug("epoch %d lr %.3g train %.4f val %.4f dice %.4f", *record.row().values())

        scheduler.step(record.val_loss, epoch)
        state.lr = scheduler.lr
        improved = record.val_dice > stopper.best
        state.stopped_early = stopper.step(record.val_dice)
        if improved:
            state.best_val_dice = record.val_dice
            state.best_epoch = epoch
            best_weights = copy.deepcopy(model.state_dict())
            if best_path is not None:
                save_checkpoint(model, best_path, epoch=epoch, val_dice=record.val_dice, train_config=config.to_dict())
        if last_path is not None:
            save_checkpoint(
                model, last_path, epoch=epoch, optimizer=optimizer.state_dict(), scheduler=scheduler.state_dict(),
                early_stop=stopper.state_dict(), best_val_dice=state.best_val_dice, best_epoch=state.best_epoch,
                stopped_early=state.stopped_early, history=[r.row() for r in state.history],
                train_config=config.to_dict(),
            )
            write_history(out / "history.csv", state.history)

    model.load_state_dict(best_weights)
    model.eval()
    return FitResult(state, best_path, last_path, start_epoch)

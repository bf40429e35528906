"""Losses, LR schedules, early stopping and the finetuning loop."""
from .config import SearchGrid, TrainConfig, TrainingFile, baseline_recipe, load_train_config, recipe_for
from .losses import bce_from_logits, combined_loss, dice_loss, dice_only_loss
from .schedule import ConstantScheduler, CosineScheduler, EarlyStopping, PlateauScheduler, make_scheduler
from .trainer import (
    HISTORY_COLUMNS,
    EpochRecord,
    FitResult,
    TrainingDivergedError,
    TrainState,
    fit,
    read_history,
    validate,
    write_history,
)

__all__ = [name for name in dir() if not name.startswith("_")]

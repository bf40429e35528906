"""Dice metric, prediction, evaluation reports and cross-dataset matrices."""
from .metrics import THRESHOLD, binarize, dice_score, predict_logits, predict_mask, predict_masks, triplet_dice
from .plots import grouped_bars, prompt_type_charts
from .reports import (
    CSV_COLUMNS,
    NO_PERTURBATION,
    CrossDatasetMatrix,
    EvalReport,
    cross_dataset_eval,
    evaluate,
    evaluate_split,
    read_reports_csv,
    read_reports_json,
    write_reports_csv,
    write_reports_json,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Evaluation reports keyed by (model, train data, test data, prompt type, perturbation)."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np
import torch.nn as nn

from ..data.datasets import DatasetHandle, SampleTriplet
from ..prompts.attributes import PromptType
from .metrics import triplet_dice

CSV_COLUMNS = ("model", "train_data", "test_data", "ptype", "perturbation", "n", "dice_mean", "dice_std")
NO_PERTURBATION = "none"


@dataclass(frozen=True)
class EvalReport:
    model: str
    train_data: str
    test_data: str
    ptype: str
    perturbation: str = NO_PERTURBATION
    sample_keys: tuple[str, ...] = ()
    values: tuple[float, ...] = ()
    in_distribution: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sample_keys", tuple(self.sample_keys))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.sample_keys) != len(self.values):
            raise ValueError("one sample key per Dice value")

    @property
    def key(self) -> tuple[str, str, str, str, str]:
        return (self.model, self.train_data, self.test_data, self.ptype, self.perturbation)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        """Mean per-image Dice, in percent."""
        return 100.0 * float(np.mean(self.values)) if self.values else float("nan")

    @property
    def std(self) -> float:
        return 100.0 * float(np.std(self.values)) if self.values else float("nan")

    def row(self) -> dict:
        return {
            "model": self.model, "train_data": self.train_data, "test_data": self.test_data, "ptype": self.ptype,
            "perturbation": self.perturbation, "n": self.n, "dice_mean": self.mean, "dice_std": self.std,
        }

    def to_json(self) -> dict:
        return {**self.row(), "in_distribution": self.in_distribution,
                "samples": dict(zip(self.sample_keys, self.values))}

    @classmethod
    def from_json(cls, data: dict) -> EvalReport:
        samples = data.get("samples", {})
        return cls(
            data["model"], data["train_data"], data["test_data"], data["ptype"], data["perturbation"],
            tuple(samples), tuple(samples.values()), data.get("in_distribution", False),
        )


def evaluate(
    model: nn.Module,
    triplets: Sequence[SampleTriplet],
    *,
    model_name: str = "model",
    train_data: str = "-",
    test_data: str | None = None,
    ptype: PromptType | str = "-",
    perturbation: str = NO_PERTURBATION,
    prompts: Sequence[str] | None = None,
    batch_size: int = 32,
) -> EvalReport:
    """Per-triplet Dice at original resolution, in the given triplet order."""
    triplets = list(triplets)
    if not triplets:
        raise ValueError(f"nothing to evaluate for {test_data or 'split'}")
    values = triplet_dice(model, triplets, prompts, batch_size)
    test_data = test_data or triplets[0].dataset
    ptype = ptype.value if isinstance(ptype, PromptType) else str(ptype)
    return EvalReport(model_name, train_data, test_data, ptype, perturbation,
                      tuple(t.key for t in triplets), tuple(values), train_data == test_data)


def evaluate_split(
    model: nn.Module,
    handle: DatasetHandle,
    split: str = "test",
    ptype: PromptType | str = PromptType.P0,
    records: Mapping | None = None,
    **kwargs,
) -> EvalReport:
    ptype = PromptType.parse(ptype)
    triplets = handle.triplets(split, records, ptype)
    if not triplets:
        raise ValueError(f"{handle.name}/{split} is empty")
    return evaluate(model, triplets, test_data=handle.name, ptype=ptype, **kwargs)


@dataclass
class CrossDatasetMatrix:
    """Reports for every (train dataset, test dataset) cell."""

    train_sets: tuple[str, ...]
    test_sets: tuple[str, ...]
    cells: dict[tuple[str, str], EvalReport] = field(default_factory=dict)

    def __getitem__(self, cell: tuple[str, str]) -> EvalReport:
        return self.cells[cell]

    def reports(self) -> list[EvalReport]:
        return [self.cells[(tr, te)] for tr in self.train_sets for te in self.test_sets if (tr, te) in self.cells]

    def in_distribution_cells(self) -> list[tuple[str, str]]:
        return [cell for cell, rep in self.cells.items() if rep.in_distribution]

    def table(self) -> list[list[str]]:
        """Header row plus one row per train set; missing cells are '-'."""
        rows = [["train \\ test", *self.test_sets]]
        for tr in self.train_sets:
            row = [tr]
            for te in self.test_sets:
                rep = self.cells.get((tr, te))
                row.append("-" if rep is None else f"{rep.mean:.2f}")
            rows.append(row)
        return rows


ModelSource = Union[nn.Module, str, Path, None]


def cross_dataset_eval(
    checkpoints: Mapping[str, ModelSource],
    test_handles: Sequence[DatasetHandle],
    *,
    ptype: PromptType | str = PromptType.P0,
    records: Mapping[str, Mapping] | None = None,
    split: str = "test",
    model_name: str = "model",
    loader: Callable[[Path], nn.Module] | None = None,
) -> CrossDatasetMatrix:
    """Evaluate each train set's model on every test handle.

    ``checkpoints`` maps train dataset name to a model or checkpoint path;
    ``records`` maps test dataset name to its indexed prompt records.
    """
    from ..models.checkpoint import load_model

    loader = loader or load_model
    families = {h.family for h in test_handles}
    if len(families) > 1:
        raise ValueError(f"test sets mix prompt families: {sorted(families)}")
    matrix = CrossDatasetMatrix(tuple(checkpoints), tuple(h.name for h in test_handles))
    triplets = {h.name: h.triplets(split, (records or {}).get(h.name), ptype) for h in test_handles}
    for train_name, source in checkpoints.items():
        if source is None or (isinstance(source, (str, Path)) and not Path(source).exists()):
            first = test_handles[0].name if test_handles else "*"
            raise FileNotFoundError(f"missing checkpoint {source} for cell ({train_name}, {first})")
        if isinstance(source, (str, Path)):
            model = loader(Path(source))
        else:
            model = source
        for h in test_handles:
            rep = evaluate(model, triplets[h.name], model_name=model_name, train_data=train_name,
                           test_data=h.name, ptype=PromptType.parse(ptype))
            matrix.cells[(train_name, h.name)] = rep
    return matrix


def write_reports_csv(reports: Iterable[EvalReport], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rep in reports:
            writer.writerow(rep.row())
    return path


def read_reports_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["n"] = int(r["n"])
        r["dice_mean"] = float(r["dice_mean"])
        r["dice_std"] = float(r["dice_std"])
    return rows


def write_reports_json(reports: Iterable[EvalReport], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([r.to_json() for r in reports], indent=2))
    return path


def read_reports_json(path: str | Path) -> list[EvalReport]:
    return [EvalReport.from_json(d) for d in json.loads(Path(path).read_text())]

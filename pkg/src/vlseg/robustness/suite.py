"""Evaluate one finetuned model under a list of prompt perturbations."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch.nn as nn

from ..data.datasets import SampleTriplet
from ..evaluation.metrics import predict_masks
from ..evaluation.plots import grouped_bars
from ..evaluation.reports import EvalReport, evaluate, write_reports_csv
from ..prompts.attributes import PromptType
from .perturb import Mode, PerturbationSpec, perturb_triplets

CHANGE_COLUMNS = ("perturbation", "mode", "attribute", "n", "base_mean", "perturbed_mean", "absolute_change",
                  "relative_change", "base_zero")


@dataclass(frozen=True)
class PerturbationResult:
    spec: PerturbationSpec
    report: EvalReport
    base: EvalReport

    @property
    def base_mean(self) -> float:
        return self.base.mean

    @property
    def perturbed_mean(self) -> float:
        return self.report.mean

    @property
    def absolute_change(self) -> float:
        """Perturbed minus base mean Dice, in points."""
        return self.perturbed_mean - self.base_mean

    @property
    def base_zero(self) -> bool:
        return self.base_mean == 0.0

    @property
    def relative_change(self) -> float:
        """Percent change of the mean Dice; NaN when the base mean is zero."""
        if self.base_zero:
            return math.nan
        return 100.0 * self.absolute_change / self.base_mean

    @property
    def change(self) -> float:
        """Relative change, or the absolute change when ``base_zero`` is set."""
        return self.absolute_change if self.base_zero else self.relative_change

    def per_sample_drop(self) -> np.ndarray:
        return np.asarray(self.base.values) - np.asarray(self.report.values)

    def row(self) -> dict:
        return {
            "perturbation": self.spec.name, "mode": self.spec.mode.value,
            "attribute": self.spec.target.value if self.spec.target else "", "n": self.report.n,
            "base_mean": self.base_mean, "perturbed_mean": self.perturbed_mean,
            "absolute_change": self.absolute_change, "relative_change": self.relative_change,
            "base_zero": self.base_zero,
        }


@dataclass
class SuiteReport:
    base: EvalReport
    results: list[PerturbationResult] = field(default_factory=list)
    prompts: dict[str, list[str]] = field(default_factory=dict)

    def __getitem__(self, name: str) -> PerturbationResult:
        for r in self.results:
            if r.spec.name == name:
                return r
        raise KeyError(name)

    def reports(self) -> list[EvalReport]:
        return [self.base, *(r.report for r in self.results)]

    def write_changes(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CHANGE_COLUMNS)
            writer.writeheader()
            for r in self.results:
                writer.writerow(r.row())
        return path


def run_perturbation_suite(
    model: nn.Module,
    triplets: Sequence[SampleTriplet],
    ptype: PromptType | str,
    specs: Sequence[PerturbationSpec],
    *,
    seed: int = 0,
    model_name: str = "model",
    train_data: str = "-",
    test_data: str | None = None,
    family: str | None = None,
    out_dir: str | Path | None = None,
    gallery_size: int = 4,
    batch_size: int = 32,
) -> SuiteReport:
    """Dice under each spec relative to the unperturbed prompts.

    ``seed`` must match the one used to generate the triplets' prompts.
    With ``out_dir`` the reports, the change table, a chart of changes and
    a worst-drop gallery per spec are written there.
    """
    triplets = list(triplets)
    ptype = PromptType.parse(ptype)
    common = dict(model_name=model_name, train_data=train_data, test_data=test_data, ptype=ptype,
                  batch_size=batch_size)
    base_prompts = [t.prompt for t in triplets]
    base = evaluate(model, triplets, prompts=base_prompts, **common)
    suite = SuiteReport(base)
    for spec in specs:
        prompts = perturb_triplets(triplets, ptype, spec, seed, family)
        report = evaluate(model, triplets, prompts=prompts, perturbation=spec.name, **common)
        suite.results.append(PerturbationResult(spec, report, base))
        suite.prompts[spec.name] = prompts
    if out_dir is not None:
        out = Path(out_dir)
        write_reports_csv(suite.reports(), out / "perturbation_reports.csv")
        suite.write_changes(out / "perturbation_changes.csv")
        change_chart(suite, out / "figs" / "perturbation_changes.png")
        for r in suite.results:
            if r.spec.mode is not Mode.IDENTITY:
                worst_drop_gallery(model, triplets, base_prompts, suite.prompts[r.spec.name], r,
                                   out / "figs" / f"gallery_{r.spec.name.replace(':', '_')}.png", gallery_size)
    return suite


def change_chart(suite: SuiteReport, path: str | Path) -> Path:
    """Bars of the change per attribute (x) and mode (series)."""
    groups: dict[str, dict[str, tuple[float, float]]] = defaultdict(dict)
    for r in suite.results:
        label = r.spec.target.value if r.spec.target else r.spec.mode.value
        groups[label][r.spec.mode.value] = (0.0 if math.isnan(r.change) else r.change, 0.0)
    return grouped_bars(groups, path, suite.base.test_data, "relative change in Dice (%)")


def worst_drop_gallery(
    model: nn.Module,
    triplets: Sequence[SampleTriplet],
    base_prompts: Sequence[str],
    perturbed_prompts: Sequence[str],
    result: PerturbationResult,
    path: str | Path,
    k: int = 4,
) -> Path:
    """Rows of (image, ground truth, base prediction, perturbed prediction) for the largest drops."""
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    order = np.argsort(-result.per_sample_drop(), kind="stable")[:k]
    picked = [triplets[i] for i in order]
    base_pred = predict_masks(model, [t.image for t in picked], [base_prompts[i] for i in order])
    pert_pred = predict_masks(model, [t.image for t in picked], [perturbed_prompts[i] for i in order])
    fig, axes = plt.subplots(len(picked), 4, figsize=(8, 2.2 * len(picked)), squeeze=False)
    for row, (i, t) in enumerate(zip(order, picked)):
        panels = (t.image, t.mask, base_pred[row], pert_pred[row])
        titles = ("image", "ground truth", f"base {100 * result.base.values[i]:.0f}",
                  f"perturbed {100 * result.report.values[i]:.0f}")
        for ax, img, title in zip(axes[row], panels, titles):
            ax.imshow(img, cmap=None if img.ndim == 3 else "gray", vmin=0, vmax=None if img.ndim == 3 else 1)
            ax.set_title(title, fontsize=7)
            ax.axis("off")
        axes[row][3].text(0, -0.15, perturbed_prompts[i][:60], transform=axes[row][3].transAxes, fontsize=5)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path

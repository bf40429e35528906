"""Static figures: grouped Dice bars per dataset over prompt types."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _rows(reports: Iterable) -> list[dict]:
    return [r.row() if hasattr(r, "row") else dict(r) for r in reports]


def grouped_bars(
    groups: Mapping[str, Mapping[str, tuple[float, float]]],
    path: str | Path,
    title: str = "",
    ylabel: str = "Dice (%)",
) -> Path:
    """``groups[x_label][series] = (value, err)`` drawn as clustered bars."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs = list(groups)
    series = sorted({s for g in groups.values() for s in g})
    width = 0.8 / max(1, len(series))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(xs) + 2), 3.2))
    for i, s in enumerate(series):
        vals = [groups[x].get(s, (np.nan, 0.0)) for x in xs]
        pos = np.arange(len(xs)) + (i - (len(series) - 1) / 2) * width
        ax.bar(pos, [v[0] for v in vals], width, yerr=[v[1] for v in vals], label=s, capsize=2)
    ax.set_xticks(np.arange(len(xs)), xs)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def prompt_type_charts(reports: Iterable, out_dir: str | Path) -> list[Path]:
    """One chart per test dataset: prompt types on x, one bar per model."""
    by_dataset: dict[str, dict[str, dict[str, tuple[float, float]]]] = defaultdict(lambda: defaultdict(dict))
    for r in _rows(reports):
        series = r["model"] if r["perturbation"] in ("", "none") else f"{r['model']} [{r['perturbation']}]"
        by_dataset[r["test_data"]][r["ptype"]][series] = (float(r["dice_mean"]), float(r["dice_std"]))
    out = []
    for dataset, groups in sorted(by_dataset.items()):
        ordered = dict(sorted(groups.items()))
        out.append(grouped_bars(ordered, Path(out_dir) / f"{dataset}_prompt_types.png", dataset))
    return out

"""Collect run results into summary tables and prompt-type charts."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from ..data.registry import DATASETS, ENDOSCOPY
from ..evaluation.plots import prompt_type_charts
from ..evaluation.reports import read_reports_csv

MISSING = "-"
REGIMES = {"individual": "finetuned", "pooled": "pooled", "endoscopy-pooled": "endoscopy-pooled"}


def collect_results(root: str | Path) -> list[dict]:
    """Every evaluation row under ``root/runs``, tagged with its run's metadata."""
    rows = []
    for cfg_path in sorted(Path(root).glob("runs/*/config.json")):
        run_dir = cfg_path.parent
        if not (run_dir / "done.json").exists():
            continue
        run = json.loads(cfg_path.read_text())["run"]
        for csv_path in sorted((run_dir / "eval").glob("*.csv")):
            for r in read_reports_csv(csv_path):
                r.update(run_id=run_dir.name, kind=run["kind"], freeze=run["freeze"],
                         train_sets=";".join(run["train_data"]), variant=run["variant"],
                         in_distribution=r["test_data"] in run["train_data"])
                rows.append(r)
    return rows


def _order(names: Iterable[str]) -> list[str]:
    known = list(DATASETS)
    return sorted(set(names), key=lambda n: (known.index(n) if n in known else len(known), n))


def _best(rows: Iterable[dict]) -> dict | None:
    """Highest-mean row (the best prompt type)."""
    best = None
    for r in rows:
        if best is None or r["dice_mean"] > best["dice_mean"]:
            best = r
    return best


def _cell(row: dict | None, with_std: bool = True) -> str:
    if row is None:
        return MISSING
    return f"{row['dice_mean']:.2f} ± {row['dice_std']:.2f}" if with_std else f"{row['dice_mean']:.2f}"


def regime_table(rows: Sequence[dict], ptype: str | None = None) -> list[list[str]]:
    """Rows: finetuning regime x model; columns: test dataset (in-distribution cells only)."""
    rows = [r for r in rows if r["in_distribution"] and r["perturbation"] == "none"
            and (ptype is None or r["ptype"] == ptype)]
    tests = _order(r["test_data"] for r in rows)
    groups: dict[tuple[str, str], dict[str, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[(REGIMES.get(r["kind"], r["kind"]), r["model"])][r["test_data"]].append(r)
    table = [["regime", "model", *tests]]
    for (regime, model), cells in sorted(groups.items()):
        table.append([regime, model, *(_cell(_best(cells.get(t, []))) for t in tests)])
    return table


def cross_table(rows: Sequence[dict], model: str, ptype: str | None = None,
                test_sets: Sequence[str] = ENDOSCOPY) -> list[list[str]]:
    """Rows: training set; columns: endoscopy test sets; '*' marks in-distribution cells."""
    rows = [r for r in rows if r["model"] == model and r["perturbation"] == "none"
            and r["kind"] in ("individual", "endoscopy-pooled") and (ptype is None or r["ptype"] == ptype)]
    cells: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for r in rows:
        if r["test_data"] in test_sets:
            cells[(r["train_data"], r["test_data"])].append(r)
    trains = _order(t for t, _ in cells if t in DATASETS) + sorted({t for t, _ in cells if t not in DATASETS})
    table = [["train \\ test", *test_sets]]
    for tr in trains:
        line = [tr]
        for te in test_sets:
            best = _best(cells.get((tr, te), []))
            text = _cell(best, with_std=False)
            line.append(text + "*" if best is not None and best["in_distribution"] else text)
        table.append(line)
    return table


def markdown(table: Sequence[Sequence[str]]) -> str:
    head, *body = table
    lines = ["| " + " | ".join(head) + " |", "|" + "|".join("---" for _ in head) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines) + "\n"


def _write_csv(table: Sequence[Sequence[str]], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(table)


def report(root: str | Path, out_dir: str | Path | None = None, ptype: str | None = None) -> dict[str, Path]:
    """Write results.csv, the regime table, one cross-dataset table per model and charts."""
    root = Path(root)
    out = Path(out_dir) if out_dir is not None else root / "report"
    out.mkdir(parents=True, exist_ok=True)
    rows = collect_results(root)
    written: dict[str, Path] = {}
    if rows:
        with open(out / "results.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        written["results"] = out / "results.csv"
    regime = regime_table(rows, ptype)
    _write_csv(regime, out / "regimes.csv")
    (out / "regimes.md").write_text(markdown(regime))
    written["regimes"] = out / "regimes.md"
    for model in sorted({r["model"] for r in rows}):
        table = cross_table(rows, model, ptype)
        if len(table) > 1:
            stem = f"cross_{model.replace('[', '_').replace(']', '')}"
            _write_csv(table, out / f"{stem}.csv")
            (out / f"{stem}.md").write_text(markdown(table))
            written[stem] = out / f"{stem}.md"
    charts = prompt_type_charts([r for r in rows if r["in_distribution"]], out / "figs")
    for c in charts:
        written[c.stem] = c
    return written

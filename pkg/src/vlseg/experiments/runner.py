"""Execute runs: prompts, training, evaluation and per-run artefacts.

Results tree::

    <root>/manifest.json
    <root>/prompts/<dataset>_s<seed>.jsonl
    <root>/runs/<run-id>/config.json
    <root>/runs/<run-id>/checkpoints/{best,last}.pt
    <root>/runs/<run-id>/history.csv
    <root>/runs/<run-id>/eval/<dataset>.{csv,json}
    <root>/runs/<run-id>/figs/history.png
    <root>/runs/<run-id>/done.json
"""
from __future__ import annotations

import hashlib
import json
import logging
import shutil
import subprocess
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import torch.nn as nn

from .. import __version__
from ..data.datasets import DatasetHandle, SampleTriplet, register_dataset
from ..data.registry import get_descriptor
from ..evaluation.reports import EvalReport, evaluate, write_reports_csv, write_reports_json
from ..models.providers import CheckpointProvider, ToyProvider
from ..models.unet import CNNConfig, build_baseline
from ..models.vlsm import build_variant, reference_config, toy_config
from ..prompts.attributes import PromptType
from ..prompts.generate import (
    PromptRecord,
    generate_prompt_records,
    index_records,
    literal_records,
    read_jsonl,
    write_jsonl,
)
from ..prompts.sidecar import load_attribute_sidecar
from ..prompts.templates import available_prompt_types
from ..training.config import TrainConfig, baseline_recipe, recipe_for
from ..training.trainer import fit
from .plan import ExperimentPlan, RunSpec

log = logging.getLogger(__name__)

FREE_TEXT_FILE = "free_text.json"
SCALES = ("toy", "reference")


@dataclass(frozen=True)
class RunnerConfig:
    data_root: Path = Path("data")
    scale: str = "toy"
    provider_manifest: Path | None = None
    train_overrides: dict = field(default_factory=dict)
    prompt_seed: int = 0
    dataset_dirs: dict = field(default_factory=dict)
    eval_split: str = "test"

    def __post_init__(self):
        object.__setattr__(self, "data_root", Path(self.data_root))
        if self.provider_manifest is not None:
            object.__setattr__(self, "provider_manifest", Path(self.provider_manifest))
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}")
        TrainConfig().with_(**self.train_overrides)  # fail early on unknown keys

    def dataset_dir(self, name: str) -> Path:
        return Path(self.dataset_dirs.get(name, self.data_root / name))

    def to_json(self) -> dict:
        d = asdict(self)
        d["data_root"] = str(self.data_root)
        d["provider_manifest"] = str(self.provider_manifest) if self.provider_manifest else None
        d["dataset_dirs"] = {k: str(v) for k, v in self.dataset_dirs.items()}
        return d


def version_string() -> str:
    """Package version plus the source revision when it can be found."""
    try:
        rev = subprocess.run(
            ["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent, capture_output=True,
            text=True, timeout=5,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def load_handle(name: str, rc: RunnerConfig) -> DatasetHandle:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        handle = register_dataset(get_descriptor(name), rc.dataset_dir(name))
    for w in caught:
        log.warning("%s", w.message)
    return handle


def dataset_records(handle: DatasetHandle, seed: int = 0, cache_dir: Path | None = None) -> list[PromptRecord]:
    """Prompt records for every split and prompt type of ``handle``.

    A ``free_text.json`` (sample id -> text) in the dataset root replaces
    the templates for every non-empty prompt type.
    """
    cache = cache_dir / f"{handle.name}_s{seed}.jsonl" if cache_dir is not None else None
    if cache is not None and cache.exists():
        return read_jsonl(cache)
    free_text = handle.root / FREE_TEXT_FILE
    ptypes = available_prompt_types(handle.family)
    if free_text.exists():
        if len(handle.class_table) != 1:
            raise ValueError(f"{handle.name}: free-text prompts need a single-class dataset")
        texts = {str(k): str(v) for k, v in json.loads(free_text.read_text()).items()}
        class_name = next(iter(handle.class_table))
        records = [r for p in ptypes if p is not PromptType.P0 for r in literal_records(texts, class_name, p)]
    else:
        sidecar = load_attribute_sidecar(handle.sidecar_path()) if handle.sidecar_path() else {}
        records = []
        for split in ("train", "val", "test"):
            records += generate_prompt_records(
                handle.family, handle.class_table, handle.iter_masks(split), sidecar, ptypes, seed
            )
    if cache is not None:
        write_jsonl(records, cache)
    return records


def build_model(spec: RunSpec, rc: RunnerConfig) -> nn.Module:
    if spec.variant == "unet":
        return build_baseline(CNNConfig(input_side=64 if rc.scale == "toy" else 256, seed=spec.seed))
    frozen = spec.freeze == "encoders"
    make = toy_config if rc.scale == "toy" else reference_config
    config = make(spec.variant, freeze_text=frozen, freeze_vision=frozen, seed=spec.seed)
    if rc.provider_manifest is not None:
        provider = CheckpointProvider(rc.provider_manifest)
    else:
        provider = ToyProvider(spec.seed)
    return build_variant(config, provider)


def train_config(spec: RunSpec, rc: RunnerConfig) -> TrainConfig:
    base = baseline_recipe() if spec.variant == "unet" else recipe_for(spec.variant)
    return base.with_(**{**rc.train_overrides, "seed": spec.seed})


def model_label(spec: RunSpec) -> str:
    return spec.variant if spec.freeze == "none" else f"{spec.variant}[frozen]"


def _fingerprint(handles: Sequence[DatasetHandle]) -> dict:
    return {
        h.name: hashlib.sha256(json.dumps({s: h.ids(s) for s in ("train", "val", "test")}).encode()).hexdigest()[:16]
        for h in handles
    }


def _checksum(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class RunResult:
    run_id: str
    status: str  # "completed" or "skipped"
    epochs_run: int
    reports: list[EvalReport] = field(default_factory=list)


class Runner:
    """Executes runs under ``root``; handles and prompt records are cached per process."""

    def __init__(self, root: str | Path, config: RunnerConfig = RunnerConfig()):
        self.root = Path(root)
        self.config = config
        self._handles: dict[str, DatasetHandle] = {}
        self._records: dict[str, dict] = {}

    def handle(self, name: str) -> DatasetHandle:
        if name not in self._handles:
            self._handles[name] = load_handle(name, self.config)
        return self._handles[name]

    def records(self, name: str) -> dict:
        if name not in self._records:
            recs = dataset_records(self.handle(name), self.config.prompt_seed, self.root / "prompts")
            self._records[name] = index_records(recs)
        return self._records[name]

    def triplets(self, names: Sequence[str], split: str, ptype: PromptType) -> list[SampleTriplet]:
        out = []
        for n in names:
            out += self.handle(n).triplets(split, self.records(n), ptype)
        return out

    def run_dir(self, spec: RunSpec) -> Path:
        return self.root / "runs" / spec.run_id

    def run_config(self, spec: RunSpec, model: nn.Module, tc: TrainConfig) -> dict:
        handles = [self.handle(n) for n in dict.fromkeys(spec.train_data + spec.eval_data)]
        return {
            "run": spec.to_json(),
            "model": model.config.to_dict(),
            "model_kind": "cnn" if spec.variant == "unet" else "vlsm",
            "train": tc.to_dict(),
            "prompt_seed": self.config.prompt_seed,
            "eval_split": self.config.eval_split,
            "data": _fingerprint(handles),
        }

    def execute(self, spec: RunSpec) -> RunResult:
        out = self.run_dir(spec)
        model = build_model(spec, self.config)
        tc = train_config(spec, self.config)
        config = self.run_config(spec, model, tc)
        checksum = _checksum(config)
        done = out / "done.json"
        if done.exists() and json.loads(done.read_text()).get("checksum") == checksum:
            log.info("%s: up to date, skipping", spec.run_id)
            return RunResult(spec.run_id, "skipped", 0)
        cfg_file = out / "config.json"
        if cfg_file.exists() and json.loads(cfg_file.read_text()).get("checksum") != checksum:
            log.info("%s: configuration changed, starting over", spec.run_id)
            shutil.rmtree(out)
        out.mkdir(parents=True, exist_ok=True)
        cfg_file.write_text(json.dumps({**config, "checksum": checksum}, indent=2))

        train = self.triplets(spec.train_data, "train", spec.ptype)
        val = self.triplets(spec.train_data, "val", spec.ptype)
        result = fit(model, train, val, tc, out_dir=out, resume=True)

        reports = []
        for name in spec.eval_data:
            rep = evaluate(
                model, self.triplets([name], self.config.eval_split, spec.ptype), model_name=model_label(spec),
                train_data=spec.train_label, test_data=name, ptype=spec.ptype,
            )
            in_dist = name in spec.train_data
            rep = EvalReport(rep.model, rep.train_data, rep.test_data, rep.ptype, rep.perturbation,
                             rep.sample_keys, rep.values, in_dist)
            write_reports_csv([rep], out / "eval" / f"{name}.csv")
            write_reports_json([rep], out / "eval" / f"{name}.json")
            reports.append(rep)
        history_figure(result.history, out / "figs" / "history.png")
        done.write_text(json.dumps({
            "checksum": checksum, "epochs": result.state.epoch, "best_epoch": result.state.best_epoch,
            "best_val_dice": result.state.best_val_dice,
        }, indent=2))
        return RunResult(spec.run_id, "completed", result.epochs_run, reports)


def history_figure(history, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path.parent.mkdir(parents=True, exist_ok=True)
    epochs = [h.epoch for h in history]
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(epochs, [h.train_loss for h in history], label="train loss")
    ax.plot(epochs, [h.val_loss for h in history], label="val loss")
    ax.plot(epochs, [h.val_dice for h in history], label="val Dice")
    ax.set_xlabel("epoch")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def run_plan(plan: ExperimentPlan, root: str | Path, config: RunnerConfig = RunnerConfig()) -> list[RunResult]:
    """Run every spec in order, skipping runs already completed with the same configuration."""
    runner = Runner(root, config)
    root = runner.root
    root.mkdir(parents=True, exist_ok=True)
    plan.save(root / "plan.json")
    manifest_path = root / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {"runs": {}}
    manifest.update({"version": version_string(), "runner": config.to_json()})
    results = []
    for spec in plan:
        res = runner.execute(spec)
        results.append(res)
        done = json.loads((runner.run_dir(spec) / "done.json").read_text())
        manifest["runs"][spec.run_id] = {"checksum": done["checksum"], "seed": spec.seed, "status": "completed"}
        manifest_path.write_text(json.dumps(manifest, indent=2))
    return results

"""The finetuning matrix: which model is trained on what, with which prompts."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..data.registry import (
    DATASETS,
    ENDOSCOPY,
    ENDOSCOPY_TRAINABLE,
    NON_RADIOLOGY_TRAINABLE,
    RADIOLOGY,
    get_descriptor,
)
from ..models.vlsm import VARIANTS
from ..prompts.attributes import PromptType
from ..prompts.templates import available_prompt_types

BASELINE_VARIANTS = ("unet",)
TRAIN_KINDS = ("individual", "pooled", "endoscopy-pooled")
FREEZE_MODES = ("none", "encoders")


@dataclass(frozen=True)
class RunSpec:
    variant: str
    train_data: tuple[str, ...]
    ptype: PromptType
    kind: str = "individual"
    freeze: str = "none"
    seed: int = 0
    eval_data: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "train_data", tuple(get_descriptor(n).name for n in self.train_data))
        object.__setattr__(self, "ptype", PromptType.parse(self.ptype))
        eval_data = self.eval_data or self.train_data
        object.__setattr__(self, "eval_data", tuple(get_descriptor(n).name for n in eval_data))
        if self.variant not in VARIANTS + BASELINE_VARIANTS:
            raise ValueError(f"unknown model {self.variant!r}")
        if self.kind not in TRAIN_KINDS:
            raise ValueError(f"unknown train kind {self.kind!r}; expected one of {TRAIN_KINDS}")
        if self.freeze not in FREEZE_MODES:
            raise ValueError(f"unknown freeze mode {self.freeze!r}")
        if self.freeze != "none" and self.variant in BASELINE_VARIANTS:
            raise ValueError("freezing applies to VLSM encoders only")
        if not self.train_data:
            raise ValueError("a run needs training data")
        if self.kind == "individual" and len(self.train_data) != 1:
            raise ValueError("an individual run trains on exactly one dataset")
        for name in self.train_data:
            if DATASETS[name].test_only:
                raise ValueError(f"{name} is test-only and cannot be used for training")
            if self.kind == "endoscopy-pooled" and DATASETS[name].family != "endoscopy":
                raise ValueError(f"{name} is not an endoscopy dataset")
            if self.ptype not in available_prompt_types(DATASETS[name].family):
                raise ValueError(f"{self.ptype.value} is unavailable for {name}")

    @property
    def train_label(self) -> str:
        if self.kind == "individual":
            return self.train_data[0]
        return self.kind

    @property
    def run_id(self) -> str:
        parts = [self.variant, self.train_label, self.ptype.value, f"s{self.seed}"]
        if self.freeze != "none":
            parts.insert(1, f"frozen-{self.freeze}")
        return "_".join(parts)

    def to_json(self) -> dict:
        d = asdict(self)
        d["ptype"] = self.ptype.value
        d["train_data"] = list(self.train_data)
        d["eval_data"] = list(self.eval_data)
        return d

    @classmethod
    def from_json(cls, data: dict) -> RunSpec:
        data = dict(data)
        data["train_data"] = tuple(data["train_data"])
        data["eval_data"] = tuple(data.get("eval_data", ()))
        return cls(**data)


@dataclass
class ExperimentPlan:
    runs: list[RunSpec] = field(default_factory=list)

    def __post_init__(self):
        seen: set[str] = set()
        for r in self.runs:
            if r.run_id in seen:
                raise ValueError(f"duplicate run id {r.run_id}")
            seen.add(r.run_id)

    def __len__(self) -> int:
        return len(self.runs)

    def __iter__(self):
        return iter(self.runs)

    def add(self, run: RunSpec) -> None:
        if any(r.run_id == run.run_id for r in self.runs):
            raise ValueError(f"duplicate run id {run.run_id}")
        self.runs.append(run)

    def extend(self, runs: Iterable[RunSpec]) -> ExperimentPlan:
        for r in runs:
            self.add(r)
        return self

    def count_by(self, attr: str) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.runs:
            out[getattr(r, attr)] = out.get(getattr(r, attr), 0) + 1
        return out

    def to_json(self) -> dict:
        return {"runs": [r.to_json() for r in self.runs]}

    @classmethod
    def from_json(cls, data: dict) -> ExperimentPlan:
        return cls([RunSpec.from_json(r) for r in data["runs"]])

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2))
        return path

    @classmethod
    def load(cls, path: str | Path) -> ExperimentPlan:
        return cls.from_json(json.loads(Path(path).read_text()))


def _eval_targets(name: str) -> tuple[str, ...]:
    # endoscopy models are also scored on every endoscopy test set
    if DATASETS[name].family == "endoscopy":
        return (name, *(n for n in ENDOSCOPY if n != name))
    return (name,)


def individual_runs(
    variants: Sequence[str], datasets: Sequence[str], seed: int = 0, freeze: str = "none"
) -> list[RunSpec]:
    """Every prompt type available for each dataset, for every variant."""
    runs = []
    for v in variants:
        for name in datasets:
            for p in available_prompt_types(get_descriptor(name).family):
                runs.append(RunSpec(v, (name,), p, "individual", freeze, seed, _eval_targets(name)))
    return runs


def non_radiology_plan(variants: Sequence[str] = VARIANTS, seed: int = 0) -> ExperimentPlan:
    return ExperimentPlan(individual_runs(variants, NON_RADIOLOGY_TRAINABLE, seed))


def radiology_plan(variants: Sequence[str] = VARIANTS, seed: int = 0) -> ExperimentPlan:
    return ExperimentPlan(individual_runs(variants, RADIOLOGY, seed))


def pooled_runs(variants: Sequence[str], seed: int = 0) -> list[RunSpec]:
    """Pooled-all and endoscopy-pooled runs over the prompt types every member offers."""
    everything = NON_RADIOLOGY_TRAINABLE + RADIOLOGY
    runs = []
    for kind, members in (("pooled", everything), ("endoscopy-pooled", ENDOSCOPY_TRAINABLE)):
        shared = set(PromptType)
        for n in members:
            shared &= set(available_prompt_types(DATASETS[n].family))
        evals = tuple(dict.fromkeys(members + (ENDOSCOPY if kind == "endoscopy-pooled" else ())))
        for v in variants:
            for p in sorted(shared, key=lambda t: t.index):
                runs.append(RunSpec(v, members, p, kind, "none", seed, evals))
    return runs


def full_plan(variants: Sequence[str] = VARIANTS, seed: int = 0, pooled: bool = True,
               frozen: bool = True, baselines: bool = True) -> ExperimentPlan:
    """Individual finetuning on every trainable dataset and prompt type, plus
    pooled runs, frozen-encoder ablations and image-only baselines."""
    plan = ExperimentPlan(individual_runs(variants, NON_RADIOLOGY_TRAINABLE + RADIOLOGY, seed))
    if pooled:
        plan.extend(pooled_runs(variants, seed))
    if frozen:
        plan.extend(individual_runs(variants, NON_RADIOLOGY_TRAINABLE, seed, freeze="encoders"))
    if baselines:
        plan.extend(
            RunSpec("unet", (n,), PromptType.P0, "individual", "none", seed, _eval_targets(n))
            for n in NON_RADIOLOGY_TRAINABLE + RADIOLOGY
        )
    return plan

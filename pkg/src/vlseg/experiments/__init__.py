"""Experiment plans, the run executor and result reporting."""
from .plan import (
    ExperimentPlan,
    RunSpec,
    individual_runs,
    non_radiology_plan,
    full_plan,
    pooled_runs,
    radiology_plan,
)
from .report import collect_results, cross_table, markdown, regime_table, report
from .runner import RunResult, Runner, RunnerConfig, dataset_records, run_plan, version_string

__all__ = [name for name in dir() if not name.startswith("_")]

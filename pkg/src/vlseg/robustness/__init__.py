"""Attribute-perturbation probes of prompt sensitivity."""
from .perturb import (
    IDENTITY,
    Mode,
    PerturbationSpec,
    default_suite,
    load_suite,
    observed_values,
    perturb_prompt,
    perturb_triplets,
)
from .suite import PerturbationResult, SuiteReport, run_perturbation_suite
from .vocab import DEFAULT_OPPOSITES, UNCOMMON_WORDS, OppositeMap

__all__ = [name for name in dir() if not name.startswith("_")]

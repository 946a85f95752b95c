"""Perturbation experiments and the inequality checkers behind them."""

from .bounds import (
    CONCAVE_FAMILIES,
    ConcaveFunction,
    JensenReport,
    bihari_bound,
    bihari_residual,
    jensen_check,
)
from .experiments import (
    EXPANSION_CONSTANT,
    PerturbationFamily,
    bsde_stability_experiment,
    fbsde_stability_experiment,
    run_experiment,
    sde_stability_experiment,
)
from .report import SCHEMA, StabilityReport, StabilityRow

__all__ = [
    "CONCAVE_FAMILIES",
    "EXPANSION_CONSTANT",
    "SCHEMA",
    "ConcaveFunction",
    "JensenReport",
    "PerturbationFamily",
    "StabilityReport",
    "StabilityRow",
    "bihari_bound",
    "bihari_residual",
    "bsde_stability_experiment",
    "fbsde_stability_experiment",
    "jensen_check",
    "run_experiment",
    "sde_stability_experiment",
]

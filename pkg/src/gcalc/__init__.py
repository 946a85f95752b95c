"""Numerical sublinear-expectation calculus driven by G-Brownian motion."""

from .calculus import SimpleProcess, bochner_integral, ito_integral, mg_norm, qv_integral
from .gbsde import BackwardDrivers, check_drivers, solve_backward
from .gfbsde import FbsdeData, ProcessPair, contraction_check, lambda_map, solve_fbsde
from .gsde import ContinuityModulus, ForwardCoefficients, check_assumptions, solve_forward
from .sublinear import (
    CylinderFunctional,
    Lattice,
    NodeProcess,
    ScenarioTree,
    TimeGrid,
    VolatilityBand,
    brute_force_expect,
    build_tree,
    conditional_expect,
    expect,
    g_function,
    lower_expect,
)

__version__ = "0.1.0"

__all__ = [
    "BackwardDrivers",
    "ContinuityModulus",
    "CylinderFunctional",
    "FbsdeData",
    "ForwardCoefficients",
    "Lattice",
    "NodeProcess",
    "ProcessPair",
    "ScenarioTree",
    "SimpleProcess",
    "TimeGrid",
    "VolatilityBand",
    "bochner_integral",
    "brute_force_expect",
    "build_tree",
    "check_assumptions",
    "check_drivers",
    "conditional_expect",
    "contraction_check",
    "expect",
    "g_function",
    "ito_integral",
    "lambda_map",
    "lower_expect",
    "mg_norm",
    "qv_integral",
    "solve_backward",
    "solve_fbsde",
    "solve_forward",
]

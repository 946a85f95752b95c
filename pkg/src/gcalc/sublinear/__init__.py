"""Discrete G-Brownian motion and sublinear (G-)expectations."""

from .expectation import (
    backward_step,
    backward_values,
    conditional_expect,
    expect,
    expect_slice,
    g_function,
    leaf_values,
    lower_expect,
)
from .lattice import Lattice
from .model import (
    DEFAULT_NODE_BUDGET,
    CylinderFunctional,
    GrowthViolation,
    NodeProcess,
    ScenarioTree,
    TimeGrid,
    VolatilityBand,
    build_tree,
    tree_size,
)
from .oracle import brute_force_expect, policy_count
from .samples import random_functional, random_functionals, random_node_values

__all__ = [
    "random_functional",
    "random_functionals",
    "random_node_values",
    "DEFAULT_NODE_BUDGET",
    "CylinderFunctional",
    "GrowthViolation",
    "Lattice",
    "NodeProcess",
    "ScenarioTree",
    "TimeGrid",
    "VolatilityBand",
    "backward_step",
    "backward_values",
    "brute_force_expect",
    "build_tree",
    "conditional_expect",
    "expect",
    "expect_slice",
    "g_function",
    "leaf_values",
    "lower_expect",
    "policy_count",
    "tree_size",
]

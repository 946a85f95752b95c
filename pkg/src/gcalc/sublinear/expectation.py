"""G-expectation by adversarial backward induction on the scenario tree."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatchError
from .model import CylinderFunctional, NodeProcess, ScenarioTree, VolatilityBand, check_same_tree


def g_function(a, band: VolatilityBand):
    """``G(a) = (sigma_high_sq * a^+ - sigma_low_sq * a^-) / 2``, elementwise."""
    a = np.asarray(a, dtype=float)
    out = 0.5 * (band.sigma_high_sq * np.maximum(a, 0.0) - band.sigma_low_sq * np.maximum(-a, 0.0))
    return float(out) if out.ndim == 0 else out


def leaf_values(X, tree: ScenarioTree) -> np.ndarray:
    """Resolve ``X`` into one value per leaf (scalar or vector per leaf)."""
    if isinstance(X, CylinderFunctional):
        return X.leaf_values(tree)
    if isinstance(X, NodeProcess):
        check_same_tree(X.tree, tree)
        return X.terminal
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        return np.full(tree.n_leaves, float(arr))
    if arr.shape[0] != tree.n_leaves or arr.ndim > 2:
        raise DimensionMismatchError(
            f"leaf array of shape {arr.shape} does not fit a tree with {tree.n_leaves} leaves"
        )
    return arr


def backward_step(values: np.ndarray, tree: ScenarioTree) -> np.ndarray:
    """One step of ``V(node) = max_v (V(child(v,+)) + V(child(v,-))) / 2``.

    ``values`` holds a full depth slice; the result is the parent slice.
    Vector values are maximized componentwise.
    """
    m, lv = tree.branching, tree.n_levels
    tail = values.shape[1:]
    kids = values.reshape(values.shape[0] // m, lv, 2, *tail)
    avg = 0.5 * (kids[:, :, 0] + kids[:, :, 1])
    return avg.max(axis=1)


def backward_values(X, tree: ScenarioTree, from_depth: int | None = None) -> list:
    """All slices of the backward recursion, index ``k`` holding depth ``k``.

    ``X`` is either a leaf functional or, with ``from_depth``, a raw array
    of node values at that depth.
    """
    if from_depth is None:
        from_depth = tree.steps
        top = leaf_values(X, tree)
    else:
        tree.check_depth(from_depth)
        top = np.asarray(X, dtype=float)
        if top.shape[0] != tree.n_nodes(from_depth):
            raise DimensionMismatchError(
                f"slice of length {top.shape[0]} does not match depth {from_depth}"
            )
    out = [None] * (from_depth + 1)
    out[from_depth] = top
    for k in range(from_depth - 1, -1, -1):
        out[k] = backward_step(out[k + 1], tree)
    return out


def expect(X, tree):
    """Upper G-expectation of ``X``.

    ``tree`` is a :class:`ScenarioTree` (exact backend) or a
    :class:`~gcalc.sublinear.lattice.Lattice` (recombining backend, cylinder
    functionals only).
    """
    from .lattice import Lattice

    if isinstance(tree, Lattice):
        return tree.expect(X)
    root = backward_values(X, tree)[0]
    return float(root[0]) if root.ndim == 1 else root[0].copy()


def lower_expect(X, tree):
    from .lattice import Lattice

    if isinstance(tree, Lattice):
        return tree.lower_expect(X)
    return -expect(-leaf_values(X, tree), tree)


def expect_slice(values, tree: ScenarioTree, k: int):
    """G-expectation of a depth-``k`` measurable variable given by its node values."""
    root = backward_values(values, tree, from_depth=k)[0]
    return float(root[0]) if root.ndim == 1 else root[0].copy()


def conditional_expect(X, tree: ScenarioTree, k: int | None = None) -> NodeProcess:
    """Conditional G-expectation as a node process.

    With ``k=None`` depth ``j`` holds ``E[X | Omega_{t_j}]`` for every ``j``.
    With ``k`` given the result represents the random variable
    ``E[X | Omega_{t_k}]``: depths ``j <= k`` carry the recursion value
    (which equals ``E[E[X|Omega_k] | Omega_j]``), deeper nodes inherit
    their depth-``k`` ancestor's value. Its terminal slice can be fed back
    into :func:`expect` or :func:`conditional_expect`.
    """
    vals = backward_values(X, tree)
    if k is None:
        return NodeProcess(tree, tuple(vals))
    k = tree.check_depth(k)
    slices = vals[: k + 1] + [tree.lift(vals[k], k, j) for j in range(k + 1, tree.steps + 1)]
    return NodeProcess(tree, tuple(slices))

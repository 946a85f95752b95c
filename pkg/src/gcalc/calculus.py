"""Integrals of simple processes on the scenario tree and M_G^p norms.

A simple process is piecewise constant on the tree's own grid,
``eta_t = sum_k xi_k 1_[t_k, t_{k+1})(t)``, with ``xi_k`` a depth-``k``
slice. All integrals use the left endpoint, so the value of an integral
process at a depth-``k`` node is the partial sum over ``j < k`` along the
node's root path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdaptednessError
from .sublinear import NodeProcess, ScenarioTree, expect_slice
from .sublinear.model import check_same_tree


@dataclass(frozen=True, eq=False)
class SimpleProcess:
    tree: ScenarioTree
    coefficients: tuple = field(repr=False)

    def __post_init__(self):
        coeffs = tuple(np.asarray(c, dtype=float) for c in self.coefficients)
        if len(coeffs) != self.tree.steps:
            raise AdaptednessError(
                f"need one coefficient slice per step ({self.tree.steps}), got {len(coeffs)}"
            )
        for k, c in enumerate(coeffs):
            if c.ndim == 0 or c.shape[0] != self.tree.n_nodes(k):
                raise AdaptednessError(
                    f"coefficient {k} has {c.shape[0] if c.ndim else 'no'} entries; an adapted "
                    f"slice at depth {k} has {self.tree.n_nodes(k)}"
                )
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_process(cls, X: NodeProcess) -> "SimpleProcess":
        """Left-endpoint sampling of a node process."""
        return cls(X.tree, X.values[:-1])

    @classmethod
    def constant(cls, tree: ScenarioTree, c) -> "SimpleProcess":
        return cls.from_process(NodeProcess.constant(tree, c))

    def map(self, fn) -> "SimpleProcess":
        return SimpleProcess(self.tree, tuple(fn(c) for c in self.coefficients))

    def __pow__(self, p):
        return self.map(lambda c: c**p)

    def __abs__(self):
        return self.map(np.abs)


def _accumulate(eta: SimpleProcess, tree: ScenarioTree, increments) -> NodeProcess:
    check_same_tree(eta.tree, tree)
    m = tree.branching
    tail = eta.coefficients[0].shape[1:] if eta.coefficients else ()
    out = [np.zeros((1, *tail))]
    for k, xi in enumerate(eta.coefficients):
        dz = increments(k)
        if tail:
            dz = dz[:, None]
        out.append(np.repeat(out[-1], m, axis=0) + np.repeat(xi, m, axis=0) * dz)
    return NodeProcess(tree, tuple(out))


def ito_integral(eta: SimpleProcess, tree: ScenarioTree) -> NodeProcess:
    """Partial sums of ``xi_j (B_{t_{j+1}} - B_{t_j})``."""
    return _accumulate(eta, tree, lambda k: tree.dB[k + 1])


def bochner_integral(eta: SimpleProcess, tree: ScenarioTree) -> NodeProcess:
    dt = tree.grid.dt
    return _accumulate(eta, tree, lambda k: np.full(tree.n_nodes(k + 1), dt[k]))


def qv_integral(eta: SimpleProcess, tree: ScenarioTree) -> NodeProcess:
    """Partial sums of ``xi_j (<B>_{t_{j+1}} - <B>_{t_j})``."""
    return _accumulate(eta, tree, lambda k: tree.dqv[k + 1])


def mg_norm(X, p: float, tree: ScenarioTree) -> float:
    """``(sum_k E[|X_{t_k}|^p] dt_k)^(1/p)`` over left endpoints ``k < N``.

    ``X`` may be a :class:`NodeProcess` or a :class:`SimpleProcess`.
    """
    if p < 1:
        raise ValueError(f"M_G^p norm needs p >= 1, got {p}")
    if isinstance(X, SimpleProcess):
        check_same_tree(X.tree, tree)
        slices = X.coefficients
    else:
        check_same_tree(X.tree, tree)
        slices = X.values[:-1]
    dt = tree.grid.dt
    total = 0.0
    for k, v in enumerate(slices):
        mag = np.linalg.norm(v, axis=-1) if v.ndim == 2 else np.abs(v)
        total += expect_slice(mag**p, tree, k) * dt[k]
    return total ** (1.0 / p)

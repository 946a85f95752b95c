"""Coupled forward-backward G-SDEs solved by Picard iteration.

    X_t = x + int b(s,X,Y) ds + int h(s,X,Y) d<B>_s + int sigma(s,X,Y) dB_s
    Y_t = E[ xi + int_t^T f(s,X,Y) ds + int_t^T g(s,X,Y) d<B>_s | Omega_t ]

The operator ``Lambda`` maps a pair ``(X, Y)`` to the right-hand sides
evaluated at that pair. It is a contraction in the product norm
``||X||_{M^2} + ||Y||_{M^2}`` with factor ``(sqrt(24) + sqrt(8)) K sqrt(T)``
whenever every coefficient is K-Lipschitz jointly in ``(x, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import mg_norm
from .errors import ContractionError, ConvergenceError
from .gsde import AssumptionReport, CheckEntry
from .sublinear import NodeProcess, ScenarioTree, conditional_expect, leaf_values
from .sublinear.model import check_same_tree


def _zero(t, x, y):
    return 0.0


@dataclass(frozen=True)
class FbsdeData:
    """Initial state, terminal data and coefficients ``phi(t, x, y)``, all K-Lipschitz."""

    x0: float
    xi: object
    K: float
    b: Callable = _zero
    h: Callable = _zero
    sigma: Callable = _zero
    f: Callable = _zero
    g: Callable = _zero
    name: str = "fbsde"

    def items(self):
        return (("b", self.b), ("h", self.h), ("sigma", self.sigma), ("f", self.f), ("g", self.g))

    def audit(self, sample_budget: int = 3000, box: float = 10.0, horizon: float = 1.0, seed: int = 0) -> AssumptionReport:
        """Sampled check of ``|phi(t,x,y) - phi(t,x',y')| <= K (|x-x'| + |y-y'|)``."""
        rng = np.random.default_rng(seed)
        p = rng.uniform(-box, box, (sample_budget, 2))
        q = rng.uniform(-box, box, (sample_budget, 2))
        half = sample_budget // 2
        q[:half] = p[:half] + rng.normal(0, 1e-3 * box, (half, 2))
        dist = np.abs(p - q).sum(axis=1)
        dist[dist == 0] = np.finfo(float).tiny
        entries = []
        for name, fn in self.items():
            worst = 0.0
            for t in np.linspace(0.0, horizon, 5):
                v1 = np.broadcast_to(np.asarray(fn(t, p[:, 0], p[:, 1]), dtype=float), dist.shape)
                v2 = np.broadcast_to(np.asarray(fn(t, q[:, 0], q[:, 1]), dtype=float), dist.shape)
                worst = max(worst, float(np.max(np.abs(v1 - v2) / dist)))
            entries.append(CheckEntry(name, "lipschitz", worst, self.K, worst <= self.K * (1 + 1e-9) + 1e-12))
        return AssumptionReport(entries, int(sample_budget))


@dataclass(frozen=True, eq=False)
class ProcessPair:
    X: NodeProcess
    Y: NodeProcess

    def __post_init__(self):
        check_same_tree(self.X.tree, self.Y.tree)
        if self.X.dim is not None or self.Y.dim is not None:
            raise ValueError("FBSDE pairs are scalar-valued")

    @property
    def tree(self) -> ScenarioTree:
        return self.X.tree

    def __sub__(self, other: "ProcessPair") -> "ProcessPair":
        return ProcessPair(self.X - other.X, self.Y - other.Y)

    def norm(self) -> float:
        """Product norm ``||X||_{M^2} + ||Y||_{M^2}`` (square-root form)."""
        return mg_norm(self.X, 2, self.tree) + mg_norm(self.Y, 2, self.tree)

    def squared_norm(self) -> float:
        """Alternative convention ``int E|X|^2 + int E|Y|^2`` (no square roots)."""
        return mg_norm(self.X, 2, self.tree) ** 2 + mg_norm(self.Y, 2, self.tree) ** 2


def contraction_check(K: float, T: float) -> tuple[float, bool]:
    """``factor = (sqrt(24 K^2) + sqrt(8 K^2)) sqrt(T) = (2 sqrt 6 + 2 sqrt 2) K sqrt(T)``."""
    if K < 0 or not T > 0:
        raise ValueError("contraction_check needs K >= 0 and T > 0")
    factor = (math.sqrt(24.0) + math.sqrt(8.0)) * K * math.sqrt(T)
    return factor, factor < 1.0


def _coef(fn, t, x, y):
    return np.broadcast_to(np.asarray(fn(t, x, y), dtype=float), x.shape)


def forward_map(pair: ProcessPair, data: FbsdeData, tree: ScenarioTree) -> NodeProcess:
    """First component of Lambda: Euler sums with coefficients read from ``pair``."""
    m = tree.branching
    t, dt = tree.grid.times, tree.grid.dt
    out = [np.full(1, float(data.x0))]
    for k in range(tree.steps):
        x, y = pair.X.at(k), pair.Y.at(k)
        drift = _coef(data.b, t[k], x, y) * dt[k]
        out.append(
            np.repeat(out[-1] + drift, m)
            + np.repeat(_coef(data.h, t[k], x, y), m) * tree.dqv[k + 1]
            + np.repeat(_coef(data.sigma, t[k], x, y), m) * tree.dB[k + 1]
        )
    return NodeProcess(tree, tuple(out))


def backward_map(pair: ProcessPair, data: FbsdeData, tree: ScenarioTree) -> NodeProcess:
    """Second component of Lambda.

    Depth ``k`` holds ``E[xi + sum_{j>=k} f_j dt + g_j d<B>_j | Omega_k]``
    with ``f_j, g_j`` read from ``pair``. Computed by the recursion
    ``Z_k = max_v {avg_v Z_{k+1} + g_k v dt} + f_k dt``, which is exact
    because ``f_k, g_k`` are known at depth ``k``.
    """
    lv = np.asarray(tree.levels)
    nl = tree.n_levels
    t, dt = tree.grid.times, tree.grid.dt
    Z = [None] * (tree.steps + 1)
    Z[-1] = np.asarray(leaf_values(data.xi, tree), dtype=float)
    for k in range(tree.steps - 1, -1, -1):
        x, y = pair.X.at(k), pair.Y.at(k)
        kids = Z[k + 1].reshape(tree.n_nodes(k), nl, 2)
        avg = 0.5 * (kids[:, :, 0] + kids[:, :, 1])
        g = _coef(data.g, t[k], x, y)
        Z[k] = (avg + g[:, None] * (lv * dt[k])[None, :]).max(axis=1) + _coef(data.f, t[k], x, y) * dt[k]
    return NodeProcess(tree, tuple(Z))


def lambda_map(pair: ProcessPair, data: FbsdeData, tree: ScenarioTree, scheme: str = "jacobi") -> ProcessPair:
    """Apply Lambda. ``jacobi`` reads the input pair in both components;
    ``gauss-seidel`` feeds the fresh forward component into the backward one."""
    check_same_tree(pair.tree, tree)
    X_new = forward_map(pair, data, tree)
    if scheme == "jacobi":
        Y_new = backward_map(pair, data, tree)
    elif scheme == "gauss-seidel":
        Y_new = backward_map(ProcessPair(X_new, pair.Y), data, tree)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return ProcessPair(X_new, Y_new)


def initial_pair(data: FbsdeData, tree: ScenarioTree) -> ProcessPair:
    """``(x, E[xi | Omega_t])``: the solution when every coefficient vanishes."""
    return ProcessPair(NodeProcess.constant(tree, data.x0), conditional_expect(data.xi, tree))


@dataclass
class FbsdeResult:
    pair: ProcessPair
    iterations: int
    residual_history: list
    factor: float
    admissible: bool
    forced: bool
    squared_residual_history: list = field(default_factory=list)

    @property
    def error_bound(self) -> float:
        """A-posteriori distance to the fixed point, ``r_last * factor / (1 - factor)``."""
        if self.factor >= 1 or not self.residual_history:
            return math.inf
        return self.residual_history[-1] * self.factor / (1.0 - self.factor)


def solve_fbsde(
    data: FbsdeData,
    tree: ScenarioTree,
    tol: float = 1e-12,
    max_iter: int = 200,
    force: bool = False,
    scheme: str = "jacobi",
    start: ProcessPair | None = None,
    audit: bool = False,
) -> FbsdeResult:
    """Picard iteration ``p_{m+1} = Lambda(p_m)`` until ``||p_{m+1} - p_m|| < tol``.

    Raises :class:`ContractionError` when the contraction condition fails
    and ``force`` is not set, and :class:`ConvergenceError` (carrying the
    residual history) after ``max_iter`` iterations.
    """
    factor, admissible = contraction_check(data.K, tree.grid.horizon)
    if not admissible and not force:
        raise ContractionError(
            f"contraction factor (2*sqrt(6)+2*sqrt(2))*K*sqrt(T) = {factor:.4f} is not < 1 "
            f"(K={data.K}, T={tree.grid.horizon})"
        )
    if audit:
        rep = data.audit(horizon=tree.grid.horizon)
        if not rep.passed:
            rep.raise_for_failures(data.name)
    pair = start if start is not None else initial_pair(data, tree)
    history, sq_history = [], []
    for it in range(1, max_iter + 1):
        new = lambda_map(pair, data, tree, scheme)
        diff = new - pair
        history.append(diff.norm())
        sq_history.append(diff.squared_norm())
        pair = new
        if history[-1] < tol:
            return FbsdeResult(pair, it, history, factor, admissible, force and not admissible, sq_history)
    raise ConvergenceError(
        f"Picard iteration did not reach tol={tol} within {max_iter} iterations", history=history
    )


def fixed_point_residual(pair: ProcessPair, data: FbsdeData, tree: ScenarioTree) -> float:
    """Product-norm distance between ``pair`` and both equations re-evaluated at it."""
    return (lambda_map(pair, data, tree) - pair).norm()

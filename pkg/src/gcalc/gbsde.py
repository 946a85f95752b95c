"""Backward G-BSDEs on the scenario tree.

    Y_t = E[ xi + int_t^T f(s, Y_s) ds + int_t^T g(s, Y_s) d<B>_s | Omega_t ]

One backward step solves, at every node of depth ``k``, the fixed point

    Y = max_v { (Y_{k+1}(v,+) + Y_{k+1}(v,-)) / 2 + f(t_k, Y) dt + g(t_k, Y) v dt }.

``g`` multiplies the variance-dependent increment ``v dt`` so it sits
inside the max; ``f`` does not depend on ``v`` and is added inside too,
which is equivalent. Vector states are maximized componentwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractionError, ConvergenceError, NonFiniteError
from .gsde import AssumptionReport, CheckEntry, ContinuityModulus, _norm, sample_pairs
from .sublinear import NodeProcess, ScenarioTree, leaf_values


def _zero(t, y):
    return 0.0


@dataclass(frozen=True)
class BackwardDrivers:
    """Drivers ``f(t, y)``, ``g(t, y)`` with declared regularity.

    ``lipschitz`` is the common constant C0 of ``f`` and ``g``. Under the
    modulus mode ``|df| + |dg| <= rho(|y1 - y2|)``. ``growth = (beta, C)``
    declares ``|f| + |g| <= beta(t) + C |y|`` with ``beta`` a float or a
    callable.
    """

    f: Callable = _zero
    g: Callable = _zero
    dim: int | None = None
    lipschitz: float | None = None
    modulus: ContinuityModulus | None = None
    growth: tuple | None = None
    name: str = "drivers"

    def items(self):
        return (("f", self.f), ("g", self.g))


def check_drivers(
    drv: BackwardDrivers, sample_budget: int = 3000, box: float = 10.0, horizon: float = 1.0, seed: int = 0
) -> AssumptionReport:
    y1, y2 = sample_pairs(drv.dim, sample_budget, box, seed)
    dy = _norm(y1 - y2)
    ts = np.linspace(0.0, horizon, 5)
    entries = []
    sum_d = np.zeros((ts.size, dy.size))
    sum_v = np.zeros((ts.size, dy.size))
    for name, fn in drv.items():
        worst = 0.0
        for i, t in enumerate(ts):
            v1 = np.broadcast_to(np.asarray(fn(t, y1), dtype=float), y1.shape)
            v2 = np.broadcast_to(np.asarray(fn(t, y2), dtype=float), y2.shape)
            d = _norm(v1 - v2)
            sum_d[i] += d
            sum_v[i] += _norm(v1)
            worst = max(worst, float(np.max(d / dy)))
        ok = drv.lipschitz is None or worst <= drv.lipschitz * (1 + 1e-9) + 1e-12
        entries.append(CheckEntry(name, "lipschitz", worst, drv.lipschitz, ok))
    if drv.modulus is not None:
        ratio = max(float(np.max(sum_d[i] / drv.modulus(dy))) for i in range(ts.size))
        entries.append(CheckEntry("all", "modulus", ratio, 1.0, ratio <= 1 + 1e-9))
    if drv.growth is not None:
        beta, c = drv.growth
        ratio = 0.0
        for i, t in enumerate(ts):
            bt = beta(t) if callable(beta) else beta
            ratio = max(ratio, float(np.max(sum_v[i] / (bt + c * _norm(y1)))))
        entries.append(CheckEntry("all", "growth", ratio, 1.0, ratio <= 1 + 1e-9))
    return AssumptionReport(entries, int(sample_budget))


def step_contraction(drv: BackwardDrivers, tree: ScenarioTree) -> float | None:
    """``(L_f + sigma_high_sq L_g) * max dt`` with ``L_f = L_g = C0``; None if undeclared."""
    if drv.lipschitz is None:
        return None
    return drv.lipschitz * (1.0 + tree.band.sigma_high_sq) * tree.grid.mesh


def _terminal(xi, tree: ScenarioTree) -> np.ndarray:
    return np.asarray(leaf_values(xi, tree), dtype=float)


def solve_backward(
    drv: BackwardDrivers,
    xi,
    tree: ScenarioTree,
    step_tol: float = 1e-13,
    max_inner: int = 200,
) -> NodeProcess:
    """Solve the G-BSDE by implicit backward induction.

    Parameters
    ----------
    drv
        Drivers with a declared Lipschitz constant (or modulus).
    xi
        Terminal data: cylinder functional, node process or leaf array.
    step_tol
        Sup-norm tolerance of the per-step fixed-point iteration.
    max_inner
        Iteration cap per step.

    Raises
    ------
    ContractionError
        If ``(L_f + sigma_high_sq L_g) dt >= 1``.
    ConvergenceError
        If a step needs more than ``max_inner`` iterations.
    """
    q = step_contraction(drv, tree)
    if q is not None and q >= 1.0:
        raise ContractionError(
            f"per-step contraction factor (L_f + sigma_high_sq L_g) dt = {q:.6g} is not < 1"
        )
    lv = np.asarray(tree.levels)
    m, nl = tree.branching, tree.n_levels
    t, dt = tree.grid.times, tree.grid.dt
    Y = [None] * (tree.steps + 1)
    Y[-1] = _terminal(xi, tree)
    for k in range(tree.steps - 1, -1, -1):
        nxt = Y[k + 1]
        tail = nxt.shape[1:]
        kids = nxt.reshape(tree.n_nodes(k), nl, 2, *tail)
        avg = 0.5 * (kids[:, :, 0] + kids[:, :, 1])  # (nodes, levels, ...)
        vdt = (lv * dt[k]).reshape(1, nl, *([1] * len(tail)))
        y = avg.max(axis=1)
        for it in range(max_inner):
            f = np.broadcast_to(np.asarray(drv.f(t[k], y), dtype=float), y.shape)
            g = np.broadcast_to(np.asarray(drv.g(t[k], y), dtype=float), y.shape)
            new = (avg + g[:, None] * vdt).max(axis=1) + f * dt[k]
            if not np.all(np.isfinite(new)):
                raise NonFiniteError(f"backward step at depth {k} (t={t[k]}) produced non-finite values")
            err = float(np.max(np.abs(new - y))) if new.size else 0.0
            y = new
            if err <= step_tol:
                break
        else:
            raise ConvergenceError(
                f"inner fixed point at depth {k} did not reach {step_tol} within {max_inner} iterations",
                history=[err],
            )
        Y[k] = y
    return NodeProcess(tree, tuple(Y))


def driver_sum_functional(drv: BackwardDrivers, Y: NodeProcess, xi, k: int) -> np.ndarray:
    """Leaf values of ``xi + sum_{j>=k} f(t_j, Y_j) dt_j + g(t_j, Y_j) d<B>_j``."""
    tree = Y.tree
    n = tree.steps
    t, dt = tree.grid.times, tree.grid.dt
    total = _terminal(xi, tree).copy()
    for j in range(k, n):
        y = Y.at(j)
        f = np.broadcast_to(np.asarray(drv.f(t[j], y), dtype=float), y.shape)
        g = np.broadcast_to(np.asarray(drv.g(t[j], y), dtype=float), y.shape)
        fj = tree.lift(f, j, n)
        gj = tree.lift(g, j, n) * (tree.lift(tree.dqv[j + 1], j + 1, n)[(...,) + (None,) * (y.ndim - 1)])
        total = total + fj * dt[j] + gj
    return total


def bsde_norms(Y: NodeProcess, tree: ScenarioTree) -> dict:
    from .calculus import mg_norm

    return {"L1": mg_norm(Y, 1, tree), "L2": mg_norm(Y, 2, tree)}

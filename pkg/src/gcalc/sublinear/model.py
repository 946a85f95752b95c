"""Discrete model of a one-dimensional G-Brownian motion.

The exact backend is a non-recombining scenario tree. At every node the
adversary picks a variance rate ``v`` from a finite level set inside the
band, then a fair sign ``zeta`` in {-1, +1} is drawn, so each node has
``2 * len(levels)`` children. Child ``c = level_index * 2 + sign_index``
of node ``i`` at depth ``k`` sits at index ``i * M + c`` at depth ``k + 1``
(``sign_index`` 0 is the down move). Every per-depth quantity is a flat
numpy array in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import (
    BudgetExceededError,
    DimensionMismatchError,
    GCalcError,
    TreeMismatchError,
)

DEFAULT_NODE_BUDGET = 2**20


@dataclass(frozen=True)
class VolatilityBand:
    """Variance interval ``[sigma_low_sq, sigma_high_sq]`` of the G function."""

    sigma_low_sq: float
    sigma_high_sq: float

    def __post_init__(self):
        lo, hi = float(self.sigma_low_sq), float(self.sigma_high_sq)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("volatility band must be finite")
        if lo < 0 or lo > hi:
            raise ValueError(
                f"need 0 <= sigma_low_sq <= sigma_high_sq, got [{lo}, {hi}]"
            )
        object.__setattr__(self, "sigma_low_sq", lo)
        object.__setattr__(self, "sigma_high_sq", hi)

    @property
    def is_classical(self) -> bool:
        return self.sigma_low_sq == self.sigma_high_sq

    def contains(self, v: float) -> bool:
        return self.sigma_low_sq <= v <= self.sigma_high_sq


@dataclass(frozen=True)
class TimeGrid:
    """Partition ``0 = t_0 < ... < t_N = T`` of the horizon.

    ``steps=0`` is accepted as the degenerate grid holding only ``t_0 = 0``.
    """

    times: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("time grid needs at least one node")
        if t[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(x) for x in t))

    @classmethod
    def uniform(cls, horizon: float, steps: int) -> "TimeGrid":
        if steps < 0:
            raise ValueError("steps must be >= 0")
        if steps == 0:
            return cls((0.0,))
        if not horizon > 0:
            raise ValueError("horizon must be > 0")
        t = np.linspace(0.0, float(horizon), int(steps) + 1)
        return cls(tuple(t))

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def horizon(self) -> float:
        return self.times[-1]

    @property
    def dt(self) -> np.ndarray:
        return np.diff(np.asarray(self.times))

    @property
    def mesh(self) -> float:
        return float(self.dt.max()) if self.steps else 0.0

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; raises if ``t`` is not a grid node."""
        arr = np.asarray(self.times)
        k = int(np.argmin(np.abs(arr - t)))
        if not np.isclose(arr[k], t, rtol=0.0, atol=1e-12 * max(1.0, self.horizon)):
            raise ValueError(f"time {t} is not on the grid")
        return k


def normalize_levels(band: VolatilityBand, vol_levels=None) -> tuple:
    if vol_levels is None:
        vol_levels = (band.sigma_low_sq, band.sigma_high_sq)
    levels = sorted({float(v) for v in vol_levels})
    if not levels:
        raise ValueError("vol_levels must be nonempty")
    for v in levels:
        if not band.contains(v):
            raise ValueError(f"variance level {v} lies outside the band")
    return tuple(levels)


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    """Exact non-recombining tree. Build with :func:`build_tree`."""

    grid: TimeGrid
    band: VolatilityBand
    levels: tuple
    B: tuple = field(repr=False)
    qv: tuple = field(repr=False)
    dB: tuple = field(repr=False)
    dqv: tuple = field(repr=False)

    @property
    def steps(self) -> int:
        return self.grid.steps

    @property
    def branching(self) -> int:
        return 2 * len(self.levels)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def n_nodes(self, depth: int) -> int:
        return self.branching**depth

    @property
    def n_leaves(self) -> int:
        return self.n_nodes(self.steps)

    @property
    def total_nodes(self) -> int:
        return sum(self.n_nodes(k) for k in range(self.steps + 1))

    def check_depth(self, k: int) -> int:
        k = int(k)
        if not 0 <= k <= self.steps:
            raise IndexError(f"depth {k} outside [0, {self.steps}]")
        return k

    def lift(self, values, depth: int, to_depth: int) -> np.ndarray:
        """Broadcast depth-``depth`` node values to every descendant at ``to_depth``."""
        values = np.asarray(values, dtype=float)
        if to_depth < depth:
            raise ValueError("can only lift to a deeper level")
        return np.repeat(values, self.branching ** (to_depth - depth), axis=0)

    def ancestor_index(self, depth: int, to_depth: int) -> np.ndarray:
        """For each node at ``depth``, the index of its ancestor at ``to_depth``."""
        return np.arange(self.n_nodes(depth)) // self.branching ** (depth - to_depth)

    def same_as(self, other: "ScenarioTree") -> bool:
        return (
            self is other
            or (
                self.grid == other.grid
                and self.band == other.band
                and self.levels == other.levels
            )
        )


def tree_size(steps: int, n_levels: int) -> int:
    m = 2 * n_levels
    return sum(m**k for k in range(steps + 1))


def build_tree(
    grid: TimeGrid,
    band: VolatilityBand,
    vol_levels: Sequence[float] | None = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> ScenarioTree:
    """Construct the exact scenario tree.

    Parameters
    ----------
    grid, band
        Time partition and variance band.
    vol_levels
        Variance rates the adversary may pick; defaults to the two band
        endpoints. Duplicates collapse, so a classical band yields a
        binary tree.
    node_budget
        Maximum total node count over all depths.
    """
    levels = normalize_levels(band, vol_levels)
    n = grid.steps
    total = tree_size(n, len(levels))
    if total > node_budget:
        raise BudgetExceededError(
            f"exact tree with N={n} steps and {len(levels)} variance levels "
            f"needs {total} nodes, budget is {node_budget}"
        )
    m = 2 * len(levels)
    v = np.repeat(np.asarray(levels), 2)
    zeta = np.tile(np.array([-1.0, 1.0]), len(levels))
    dt = grid.dt

    B = [np.zeros(1)]
    qv = [np.zeros(1)]
    dB = [np.zeros(0)]
    dqv = [np.zeros(0)]
    for k in range(n):
        width = m**k
        edge_b = np.tile(zeta * np.sqrt(v * dt[k]), width)
        edge_q = np.tile(v * dt[k], width)
        B.append(np.repeat(B[-1], m) + edge_b)
        qv.append(np.repeat(qv[-1], m) + edge_q)
        dB.append(edge_b)
        dqv.append(edge_q)
    for arr in (*B, *qv, *dB, *dqv):
        arr.setflags(write=False)
    return ScenarioTree(grid, band, levels, tuple(B), tuple(qv), tuple(dB), tuple(dqv))


class GrowthViolation(GCalcError, ValueError):
    """Sampled pair contradicting a functional's declared growth metadata."""


@dataclass(frozen=True, eq=False)
class CylinderFunctional:
    """``phi(B_{t_i1}, ..., B_{t_im})`` for grid indices ``i1 < ... < im``.

    ``func`` receives an array of shape ``(..., m)`` and must return shape
    ``(...)``; wrap scalar code with ``np.vectorize`` if needed. When
    ``growth_c`` is given the C_{l,Lip} bound
    ``|phi(x) - phi(y)| <= C (1 + |x|^p + |y|^p) |x - y|`` is spot-checked
    at construction.
    """

    indices: tuple
    func: Callable = field(repr=False)
    growth_c: float | None = None
    growth_pow: int = 0
    name: str = "phi"

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("a cylinder functional needs at least one observation")
        if any(i < 0 for i in idx) or any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("observation indices must be nonnegative and strictly increasing")
        object.__setattr__(self, "indices", idx)
        if self.growth_c is not None:
            if self.growth_c < 0 or self.growth_pow < 0:
                raise ValueError("growth metadata must be nonnegative")
            self._audit_growth()

    @property
    def arity(self) -> int:
        return len(self.indices)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.arity:
            raise DimensionMismatchError(
                f"{self.name} takes {self.arity} coordinates, got {x.shape[-1]}"
            )
        return np.asarray(self.func(x), dtype=float)

    def _audit_growth(self, samples: int = 256, seed: int = 7):
        rng = np.random.default_rng(seed)
        scale = np.repeat([0.1, 1.0, 5.0], -(-samples // 3))[:samples, None]
        x = rng.standard_normal((samples, self.arity)) * scale
        y = x + rng.standard_normal((samples, self.arity)) * scale * 0.5
        lhs = np.abs(self(x) - self(y))
        nx = np.linalg.norm(x, axis=-1)
        ny = np.linalg.norm(y, axis=-1)
        rhs = self.growth_c * (1 + nx**self.growth_pow + ny**self.growth_pow) * np.linalg.norm(
            x - y, axis=-1
        )
        bad = lhs > rhs * (1 + 1e-9) + 1e-12
        if np.any(bad):
            j = int(np.argmax(bad))
            raise GrowthViolation(
                f"{self.name} violates declared growth (C={self.growth_c}, "
                f"m={self.growth_pow}) at x={x[j].tolist()}, y={y[j].tolist()}"
            )

    def max_index(self) -> int:
        return self.indices[-1]

    def leaf_values(self, tree: ScenarioTree) -> np.ndarray:
        """Evaluate at every leaf of ``tree`` from the B-values on the root path."""
        n = tree.steps
        if self.max_index() > n:
            raise DimensionMismatchError(
                f"{self.name} observes index {self.max_index()} beyond tree depth {n}"
            )
        cols = [tree.lift(tree.B[i], i, n) for i in self.indices]
        return self(np.stack(cols, axis=-1))


@dataclass(frozen=True, eq=False)
class NodeProcess:
    """Real or vector valued process with one value per tree node.

    ``values[k]`` has shape ``(M**k,)`` for scalars or ``(M**k, n)`` for
    n-dimensional states. A value per node is automatically adapted in a
    non-recombining tree: the node is its own root path.
    """

    tree: ScenarioTree
    values: tuple = field(repr=False)

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float) for v in self.values)
        if len(vals) != self.tree.steps + 1:
            raise DimensionMismatchError(
                f"need {self.tree.steps + 1} depth slices, got {len(vals)}"
            )
        tail = vals[0].shape[1:]
        if len(tail) > 1:
            raise DimensionMismatchError("node values must be scalars or vectors")
        for k, v in enumerate(vals):
            if v.shape[0] != self.tree.n_nodes(k) or v.shape[1:] != tail:
                raise DimensionMismatchError(
                    f"slice {k} has shape {v.shape}, expected "
                    f"{(self.tree.n_nodes(k), *tail)}"
                )
            v.setflags(write=False)
        object.__setattr__(self, "values", vals)

    adapted = True

    @property
    def dim(self) -> int | None:
        shape = self.values[0].shape
        return shape[1] if len(shape) == 2 else None

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def at(self, k: int) -> np.ndarray:
        return self.values[self.tree.check_depth(k)]

    @classmethod
    def constant(cls, tree: ScenarioTree, c) -> "NodeProcess":
        c = np.asarray(c, dtype=float)
        return cls(
            tree,
            tuple(np.broadcast_to(c, (tree.n_nodes(k), *c.shape)).copy() for k in range(tree.steps + 1)),
        )

    @classmethod
    def from_function(cls, tree: ScenarioTree, fn) -> "NodeProcess":
        """Build from ``fn(t, B, qv)`` evaluated slice by slice."""
        t = tree.grid.times
        return cls(
            tree,
            tuple(
                np.broadcast_to(
                    np.asarray(fn(t[k], tree.B[k], tree.qv[k]), dtype=float),
                    tree.B[k].shape,
                ).copy()
                for k in range(tree.steps + 1)
            ),
        )

    @classmethod
    def brownian(cls, tree: ScenarioTree) -> "NodeProcess":
        return cls(tree, tree.B)

    @classmethod
    def quadratic_variation(cls, tree: ScenarioTree) -> "NodeProcess":
        return cls(tree, tree.qv)

    def map(self, fn) -> "NodeProcess":
        return NodeProcess(self.tree, tuple(fn(v) for v in self.values))

    def _combine(self, other, op) -> "NodeProcess":
        if isinstance(other, NodeProcess):
            check_same_tree(self.tree, other.tree)
            return NodeProcess(self.tree, tuple(op(a, b) for a, b in zip(self.values, other.values)))
        return self.map(lambda a: op(a, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return self.map(lambda a: other - a)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return self.map(np.negative)

    def __abs__(self):
        if self.dim is None:
            return self.map(np.abs)
        return self.map(lambda a: np.linalg.norm(a, axis=-1))

    def __pow__(self, p):
        return self.map(lambda a: a**p)

    def max_abs_diff(self, other: "NodeProcess") -> float:
        check_same_tree(self.tree, other.tree)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.values, other.values))


def check_same_tree(a: ScenarioTree, b: ScenarioTree):
    if not a.same_as(b):
        raise TreeMismatchError("processes live on different scenario trees")

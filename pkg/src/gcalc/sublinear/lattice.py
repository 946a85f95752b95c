"""Recombining trinomial lattice for G-expectations of cylinder functionals.

The exact tree grows like ``(2L)^N`` and stops being usable around N = 9.
For long grids the state is put on a fixed mesh ``x = j h`` with
``h^2 = sigma_high_sq * max(dt)``. A step with variance ``v`` moves
``+-h`` with probability ``v dt / (2 h^2)`` each and stays otherwise, so
every admissible ``v`` gives mean 0 and variance ``v dt`` exactly. The
one-step value is linear in ``v``, hence the sup over the whole band is
attained at an endpoint and equals

    V_k(x) = V_{k+1}(x) + (dt / h^2) G(V_{k+1}(x+h) + V_{k+1}(x-h) - 2 V_{k+1}(x)).

When the band is classical the middle branch vanishes and the lattice is
the plain binomial tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BudgetExceededError, DimensionMismatchError
from .model import CylinderFunctional, TimeGrid, VolatilityBand, normalize_levels

DEFAULT_LATTICE_BUDGET = 50_000_000


@dataclass(frozen=True)
class Lattice:
    grid: TimeGrid
    band: VolatilityBand
    vol_levels: tuple | None = None
    budget: int = DEFAULT_LATTICE_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "vol_levels", normalize_levels(self.band, self.vol_levels))

    @property
    def steps(self) -> int:
        return self.grid.steps

    @property
    def spacing(self) -> float:
        return float(np.sqrt(max(self.vol_levels) * self.grid.mesh))

    def _generator(self, lap):
        lo, hi = min(self.vol_levels), max(self.vol_levels)
        return 0.5 * (hi * np.maximum(lap, 0.0) - lo * np.maximum(-lap, 0.0))

    def expect(self, X: CylinderFunctional) -> float:
        if not isinstance(X, CylinderFunctional):
            raise TypeError("the lattice backend evaluates cylinder functionals only")
        n = self.steps
        if X.max_index() > n:
            raise DimensionMismatchError(
                f"{X.name} observes index {X.max_index()} beyond lattice depth {n}"
            )
        h = self.spacing
        if h == 0.0 or n == 0:
            return float(X(np.zeros(X.arity)))

        # one axis per observation strictly before N, plus the running state
        early = [i for i in X.indices if i < n]
        sizes = [2 * i + 1 for i in early] + [2 * n + 1]
        if int(np.prod(sizes, dtype=float)) * max(1, X.arity) > self.budget:
            raise BudgetExceededError(
                f"lattice value array for {X.name} on N={n} needs {sizes}, "
                f"budget is {self.budget} entries"
            )
        axes = [h * np.arange(-i, i + 1, dtype=float) for i in early]
        cur = h * np.arange(-n, n + 1, dtype=float)
        mesh = np.meshgrid(*axes, cur, indexing="ij", sparse=True)
        cols = list(mesh[:-1])
        if X.indices[-1] == n:
            cols.append(mesh[-1])
        shape = np.broadcast_shapes(*(c.shape for c in mesh))
        V = X(np.stack([np.broadcast_to(c, shape) for c in cols], axis=-1))

        pending = list(early)
        dt = self.grid.dt
        for k in range(n - 1, -1, -1):
            mid = V[..., 1:-1]
            lap = V[..., 2:] + V[..., :-2] - 2.0 * mid
            V = mid + (dt[k] / h**2) * self._generator(lap)
            if pending and pending[-1] == k:
                pending.pop()
                V = np.diagonal(V, axis1=-2, axis2=-1)
        return float(V.reshape(-1)[0])

    def lower_expect(self, X: CylinderFunctional) -> float:
        neg = CylinderFunctional(X.indices, lambda x: -X.func(x), name=f"-{X.name}")
        return -self.expect(neg)

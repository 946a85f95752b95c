"""Seeded random cylinder functionals for property checks."""

from __future__ import annotations

import numpy as np

from .model import CylinderFunctional

# each piece is Lipschitz with constant 1 in its coordinate
_PIECES = (
    lambda x, c: x,
    lambda x, c: np.abs(x - c),
    lambda x, c: np.maximum(x - c, 0.0),
    lambda x, c: np.sin(x + c),
    lambda x, c: np.minimum(x, c),
    lambda x, c: np.tanh(x - c),
)


def random_functional(rng: np.random.Generator, steps: int, max_arity: int = 3, quadratic: bool = True) -> CylinderFunctional:
    """Random sum of Lipschitz pieces in up to ``max_arity`` coordinates,
    optionally plus a quadratic term."""
    arity = int(rng.integers(1, min(max_arity, steps) + 1))
    idx = tuple(sorted(int(i) for i in rng.choice(np.arange(1, steps + 1), size=arity, replace=False)))
    n_terms = int(rng.integers(1, 4))
    coord = rng.integers(0, arity, n_terms)
    kind = rng.integers(0, len(_PIECES), n_terms)
    weight = rng.uniform(-2.0, 2.0, n_terms)
    shift = rng.uniform(-1.0, 1.0, n_terms)
    quad = float(rng.uniform(-0.5, 0.5)) if quadratic and rng.random() < 0.5 else 0.0
    qc = int(rng.integers(0, arity))
    const = float(rng.uniform(-1.0, 1.0))

    def func(x):
        out = np.full(x.shape[:-1], const)
        for c, k, w, s in zip(coord, kind, weight, shift):
            out = out + w * _PIECES[k](x[..., c], s)
        return out + quad * x[..., qc] ** 2

    lip = float(np.abs(weight).sum()) + 2 * abs(quad)
    return CylinderFunctional(idx, func, growth_c=lip, growth_pow=1, name=f"random{idx}")


def random_functionals(seed: int, count: int, steps: int, **kw) -> list:
    rng = np.random.default_rng(seed)
    return [random_functional(rng, steps, **kw) for _ in range(count)]


def random_node_values(rng: np.random.Generator, tree, depth: int, scale: float = 1.0) -> np.ndarray:
    """Arbitrary values on the depth-``depth`` slice. Any such slice is adapted."""
    return rng.normal(0.0, scale, tree.n_nodes(depth))

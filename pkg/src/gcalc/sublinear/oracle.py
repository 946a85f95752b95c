"""Independent oracle for the exact-tree G-expectation.

Two strategies, neither touching the tree's stored arrays nor the
backward-induction code:

``policies``
    Literal enumeration of every adapted variance policy. Under a policy
    the variance at step ``k`` is a function of the sign history, so a
    policy is one level per sign-history node (``2^N - 1`` of them). The
    policy-wise classical expectation averages over all ``2^N`` sign
    paths with weight ``2^-N``; the result is the max over policies.
    Only feasible for tiny N.
``recursive``
    Depth-first walk over explicit root paths, taking the max over levels
    of the sign average at every history. Since each history node chooses
    independently, the nested max equals the sup over policies.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import BudgetExceededError, DimensionMismatchError
from .model import CylinderFunctional, NodeProcess, ScenarioTree

DEFAULT_POLICY_BUDGET = 2**16
DEFAULT_PATH_BUDGET = 2**18


def _evaluator(X, tree: ScenarioTree):
    """Return ``f(levels, signs)`` evaluating X on batches of explicit paths.

    ``levels`` and ``signs`` are integer arrays of shape ``(..., N)``.
    """
    n = tree.steps
    lv = np.asarray(tree.levels)
    dt = tree.grid.dt
    m = tree.branching

    if isinstance(X, CylinderFunctional):
        if X.max_index() > n:
            raise DimensionMismatchError(f"{X.name} observes beyond depth {n}")

        def f(levels, signs):
            incr = (2.0 * signs - 1.0) * np.sqrt(lv[levels] * dt)
            path = np.concatenate([np.zeros(incr.shape[:-1] + (1,)), np.cumsum(incr, axis=-1)], axis=-1)
            return X(path[..., list(X.indices)])

        return f

    if isinstance(X, NodeProcess):
        leaves = X.terminal
    else:
        leaves = np.asarray(X, dtype=float)
        if leaves.ndim == 0:
            leaves = np.full(tree.n_leaves, float(leaves))
    if leaves.shape[0] != tree.n_leaves or leaves.ndim != 1:
        raise DimensionMismatchError("oracle needs one scalar per leaf")
    weights = m ** np.arange(n - 1, -1, -1)

    def f(levels, signs):
        idx = ((2 * levels + signs) * weights).sum(axis=-1)
        return leaves[idx]

    return f


def policy_count(tree: ScenarioTree) -> int:
    decisions = 2**tree.steps - 1
    return tree.n_levels**decisions


def _by_policies(X, tree: ScenarioTree) -> float:
    n = tree.steps
    f = _evaluator(X, tree)
    if n == 0:
        return float(f(np.zeros((1, 0), int), np.zeros((1, 0), int))[0])
    signs = np.array(list(itertools.product((0, 1), repeat=n)), dtype=int)  # (2^n, n)
    # sign-history node id at step k: (2^k - 1) + integer value of the first k signs
    prefix = np.zeros((signs.shape[0], n), dtype=int)
    for k in range(1, n):
        prefix[:, k] = prefix[:, k - 1] * 2 + signs[:, k - 1]
    node_id = (2 ** np.arange(n) - 1)[None, :] + prefix
    n_dec = 2**n - 1
    best = -math.inf
    chunk = max(1, 2**16 // signs.shape[0])
    policies = itertools.product(range(tree.n_levels), repeat=n_dec)
    while True:
        batch = list(itertools.islice(policies, chunk))
        if not batch:
            break
        pol = np.asarray(batch, dtype=int)  # (P, n_dec)
        levels = pol[:, node_id]  # (P, 2^n, n)
        vals = f(levels, np.broadcast_to(signs, levels.shape))
        best = max(best, float(vals.mean(axis=1).max()))
    return best


def _by_recursion(X, tree: ScenarioTree) -> float:
    n = tree.steps
    f = _evaluator(X, tree)
    nl = tree.n_levels
    # every explicit path evaluated in one batch, keyed by its (level, sign) history
    hist = np.array(list(itertools.product(range(nl), (0, 1), repeat=n)), dtype=int).reshape(-1, n, 2)
    table = dict(zip(map(bytes, hist.astype(np.int8)), f(hist[..., 0], hist[..., 1]).tolist()))

    def value(prefix):
        if len(prefix) == 2 * n:
            return table[bytes(prefix)]
        return max(
            0.5 * (value(prefix + bytes((l, 0))) + value(prefix + bytes((l, 1))))
            for l in range(nl)
        )

    return float(value(b""))


def brute_force_expect(
    X,
    tree: ScenarioTree,
    method: str = "auto",
    policy_budget: int = DEFAULT_POLICY_BUDGET,
    path_budget: int = DEFAULT_PATH_BUDGET,
) -> float:
    """Sup over adapted variance policies of the policy-wise expectation.

    ``method`` is ``"policies"``, ``"recursive"`` or ``"auto"`` (policy
    enumeration when it fits ``policy_budget``, else recursion).
    """
    if tree.n_leaves > path_budget:
        raise BudgetExceededError(
            f"oracle path enumeration with N={tree.steps} and {tree.n_levels} levels "
            f"visits {tree.n_leaves} leaves, budget is {path_budget}"
        )
    n_pol = policy_count(tree)
    if method == "auto":
        method = "policies" if n_pol <= policy_budget else "recursive"
    if method == "policies":
        if n_pol > policy_budget:
            raise BudgetExceededError(
                f"{n_pol} policies for N={tree.steps} with {tree.n_levels} levels "
                f"exceed budget {policy_budget}"
            )
        return _by_policies(X, tree)
    if method == "recursive":
        return _by_recursion(X, tree)
    raise ValueError(f"unknown oracle method {method!r}")

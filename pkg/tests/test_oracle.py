import numpy as np
import pytest

from gcalc.errors import BudgetExceededError
from gcalc.sublinear import (
    CylinderFunctional,
    TimeGrid,
    VolatilityBand,
    brute_force_expect,
    build_tree,
    conditional_expect,
    expect,
    policy_count,
    random_functionals,
)
from oracles import explicit_paths

BAND = VolatilityBand(0.5, 1.0)


def tree(n, levels=None):
    return build_tree(TimeGrid.uniform(1.0, n), BAND, levels)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_policy_enumeration_matches_recursion(n):
    t = tree(n)
    for X in random_functionals(100 + n, 5, n):
        a = brute_force_expect(X, t, method="policies")
        b = brute_force_expect(X, t, method="recursive")
        assert a == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_oracle_matches_dp(n):
    t = tree(n)
    for X in random_functionals(n, 20, n):
        assert abs(expect(X, t) - brute_force_expect(X, t)) <= 1e-9


def test_three_levels():
    t = tree(3, (0.5, 0.7, 1.0))
    # sin is neither convex nor concave, so interior levels can matter
    X = CylinderFunctional((1, 3), lambda x: np.sin(3 * x[..., 1]) * x[..., 0])
    assert expect(X, t) == pytest.approx(brute_force_expect(X, t), abs=1e-12)


def test_trivial_values():
    t = tree(3)
    assert brute_force_expect(np.zeros(t.n_leaves), t) == 0.0
    bt2 = CylinderFunctional((3,), lambda x: x[..., 0] ** 2)
    assert brute_force_expect(bt2, t) == pytest.approx(1.0, abs=1e-14)


def test_explicit_paths_match_tree_leaves():
    hist, B = explicit_paths(6, (0.5, 1.0))
    assert B.shape == (4096, 7)
    assert np.allclose(np.sort(B[:, -1]), np.sort(tree(6).B[6]), atol=1e-14)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_conditional_b_squared_on_subtrees(k):
    full = tree(6)
    cond = conditional_expect(CylinderFunctional((6,), lambda x: x[..., 0] ** 2), full)
    sub = build_tree(TimeGrid((0.0, *np.linspace(1 / 6, 1 - k / 6, 6 - k))), BAND)
    for node in (0, full.n_nodes(k) // 3, full.n_nodes(k) - 1):
        x = full.B[k][node]
        ref = brute_force_expect(CylinderFunctional((6 - k,), lambda y, x=x: (x + y[..., 0]) ** 2), sub)
        assert cond.at(k)[node] == pytest.approx(ref, abs=1e-12)
        assert ref == pytest.approx(x**2 + 1 - k / 6, abs=1e-12)


def test_policy_count():
    assert policy_count(tree(3)) == 2**7


def test_budget():
    with pytest.raises(BudgetExceededError):
        brute_force_expect(np.zeros(4**5), tree(5), method="policies")
    with pytest.raises(BudgetExceededError):
        brute_force_expect(np.zeros(4**4), tree(4), path_budget=100)

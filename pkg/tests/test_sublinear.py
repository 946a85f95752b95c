import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcalc.errors import BudgetExceededError, DimensionMismatchError
from gcalc.sublinear import (
    CylinderFunctional,
    GrowthViolation,
    NodeProcess,
    TimeGrid,
    VolatilityBand,
    build_tree,
    conditional_expect,
    expect,
    g_function,
    leaf_values,
    lower_expect,
    random_functional,
    random_node_values,
)

BAND = VolatilityBand(0.5, 1.0)


def terminal(n, fn, **kw):
    return CylinderFunctional((n,), lambda x: fn(x[..., 0]), **kw)


@pytest.fixture(scope="module")
def tree4():
    return build_tree(TimeGrid.uniform(1.0, 4), BAND)


@pytest.mark.parametrize("a, expected", [(2.0, 1.0), (0.0, 0.0), (-2.0, -0.5)])
def test_g_function_values(a, expected):
    assert g_function(a, BAND) == expected


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 10))
def test_g_function_sublinear(a, b, lam):
    assert g_function(a + b, BAND) <= g_function(a, BAND) + g_function(b, BAND) + 1e-12
    assert math.isclose(g_function(lam * a, BAND), lam * g_function(a, BAND), rel_tol=1e-12, abs_tol=1e-12)


def test_band_validation():
    with pytest.raises(ValueError):
        VolatilityBand(1.0, 0.5)
    with pytest.raises(ValueError):
        VolatilityBand(-0.1, 0.5)
    assert VolatilityBand(1.0, 1.0).is_classical
    assert not BAND.is_classical


def test_grid():
    g = TimeGrid.uniform(2.0, 4)
    assert g.steps == 4 and g.horizon == 2.0 and g.mesh == pytest.approx(0.5)
    assert g.index_of(1.5) == 3
    with pytest.raises(ValueError):
        g.index_of(1.2)
    with pytest.raises(ValueError):
        TimeGrid((0.0, 0.5, 0.4))


def test_one_step_tree():
    tree = build_tree(TimeGrid.uniform(1.0, 1), BAND)
    assert tree.n_leaves == 4
    assert sorted(tree.dB[1]) == pytest.approx(sorted([-math.sqrt(0.5), math.sqrt(0.5), -1.0, 1.0]))


def test_zero_step_tree():
    tree = build_tree(TimeGrid.uniform(1.0, 0), BAND)
    assert tree.total_nodes == 1
    assert tree.B[0][0] == 0.0 and tree.qv[0][0] == 0.0


def test_six_step_leaves():
    assert build_tree(TimeGrid.uniform(1.0, 6), BAND).n_leaves == 4096


def test_budget_error_names_size():
    with pytest.raises(BudgetExceededError, match=r"N=10.*2 variance levels"):
        build_tree(TimeGrid.uniform(1.0, 10), BAND)


def test_levels_must_lie_in_band():
    with pytest.raises(ValueError):
        build_tree(TimeGrid.uniform(1.0, 2), BAND, vol_levels=(0.5, 1.5))


@pytest.mark.parametrize("levels", [None, (0.5, 0.75, 1.0)])
def test_tree_path_invariants(levels):
    tree = build_tree(TimeGrid.uniform(1.0, 4), BAND, levels)
    n = tree.steps
    for k in range(1, n + 1):
        parent_B = np.repeat(tree.B[k - 1], tree.branching)
        parent_q = np.repeat(tree.qv[k - 1], tree.branching)
        assert np.allclose(tree.B[k], parent_B + tree.dB[k], atol=0)
        assert np.all(tree.qv[k] >= parent_q)
    # <B>_k = B_k^2 - 2 sum_{j<k} B_j dB_j on every node
    ito = [np.zeros(1)]
    for k in range(n):
        ito.append(np.repeat(ito[-1] + 0.0, tree.branching) + np.repeat(tree.B[k], tree.branching) * tree.dB[k + 1])
    for k in range(n + 1):
        assert np.max(np.abs(tree.qv[k] - (tree.B[k] ** 2 - 2 * ito[k]))) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 5, 6])
def test_envelope_exact_for_any_depth(n):
    tree = build_tree(TimeGrid.uniform(1.0, n), BAND)
    X = terminal(n, lambda b: b**2)
    assert expect(X, tree) == pytest.approx(1.0, abs=1e-12)
    assert lower_expect(X, tree) == pytest.approx(0.5, abs=1e-12)


def test_constants_and_symmetry(tree4):
    assert expect(5.0, tree4) == 5.0
    assert lower_expect(-2.0, tree4) == -2.0
    assert expect(terminal(4, lambda b: b), tree4) == pytest.approx(0.0, abs=1e-15)
    assert lower_expect(terminal(4, lambda b: b), tree4) == pytest.approx(0.0, abs=1e-15)


def test_conditional_examples(tree4):
    cB = conditional_expect(terminal(4, lambda b: b), tree4)
    c2 = conditional_expect(terminal(4, lambda b: b**2), tree4)
    for k in range(5):
        assert np.allclose(cB.at(k), tree4.B[k], atol=1e-14)
        assert np.allclose(c2.at(k), tree4.B[k] ** 2 + (1.0 - tree4.grid.times[k]), atol=1e-14)
    assert float(c2.at(0)[0]) == expect(terminal(4, lambda b: b**2), tree4)


def test_conditional_at_fixed_depth(tree4):
    X = terminal(4, lambda b: np.abs(b - 0.2))
    full = conditional_expect(X, tree4)
    at2 = conditional_expect(X, tree4, 2)
    assert np.array_equal(at2.at(2), full.at(2))
    assert np.array_equal(at2.terminal, tree4.lift(full.at(2), 2, 4))
    with pytest.raises(IndexError):
        conditional_expect(X, tree4, 5)


def test_vector_values_are_componentwise(tree4):
    leaves = np.stack([tree4.B[4] ** 2, -tree4.B[4] ** 2], axis=-1)
    v = expect(leaves, tree4)
    assert v == pytest.approx([1.0, -0.5])


def test_dimension_mismatch(tree4):
    with pytest.raises(DimensionMismatchError):
        expect(terminal(5, lambda b: b), tree4)
    with pytest.raises(DimensionMismatchError):
        expect(np.zeros(7), tree4)


def test_growth_audit_rejects_false_claim():
    with pytest.raises(GrowthViolation):
        CylinderFunctional((1,), lambda x: x[..., 0] ** 3, growth_c=1.0, growth_pow=0)
    CylinderFunctional((1,), lambda x: x[..., 0] ** 3, growth_c=3.0, growth_pow=2)


def test_cylinder_indices_validated():
    with pytest.raises(ValueError):
        CylinderFunctional((2, 1), lambda x: x[..., 0])
    with pytest.raises(ValueError):
        CylinderFunctional((), lambda x: x[..., 0])


def test_node_process_shapes(tree4):
    with pytest.raises(ValueError):
        NodeProcess(tree4, (np.zeros(1), np.zeros(3)))
    B = NodeProcess.brownian(tree4)
    assert (B * 2.0 - B).max_abs_diff(B) == 0.0
    with pytest.raises(ValueError):
        B.values[1][0] = 3.0


def test_classical_band_is_plain_average():
    tree = build_tree(TimeGrid.uniform(1.0, 6), VolatilityBand(1.0, 1.0))
    X = terminal(6, lambda b: np.maximum(b, 0.0))
    assert expect(X, tree) == pytest.approx(float(np.mean(leaf_values(X, tree))), abs=1e-14)


# --- sublinearity axioms and conditional properties on random functionals ---

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(-3, 3), st.floats(0, 4))
def test_axioms(seed, c, lam):
    tree = build_tree(TimeGrid.uniform(1.0, 4), BAND)
    rng = np.random.default_rng(seed)
    X = leaf_values(random_functional(rng, 4), tree)
    Y = leaf_values(random_functional(rng, 4), tree)
    eX, eY = expect(X, tree), expect(Y, tree)
    assert expect(X + np.abs(Y), tree) >= eX - 1e-12
    assert expect(X + Y, tree) <= eX + eY + 1e-12
    assert expect(lam * X, tree) == pytest.approx(lam * eX, abs=1e-12)
    assert expect(X + c, tree) == pytest.approx(eX + c, abs=1e-12)
    assert lower_expect(X, tree) <= eX + 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.data())
def test_conditional_properties(seed, data):
    tree = build_tree(TimeGrid.uniform(1.0, 4), BAND)
    rng = np.random.default_rng(seed)
    X = leaf_values(random_functional(rng, 4), tree)
    Y = leaf_values(random_functional(rng, 4), tree)
    k = data.draw(st.integers(0, 4))
    s = data.draw(st.integers(0, k))
    cX = conditional_expect(X, tree)
    cY = conditional_expect(Y, tree)
    cXY = conditional_expect(X - Y, tree)
    cZ = conditional_expect(X + np.abs(Y), tree)
    for j in range(5):
        assert np.all(cX.at(j) <= cZ.at(j) + 1e-12)
        assert np.all(cX.at(j) - cY.at(j) <= cXY.at(j) + 1e-12)
    # positive and negative parts of an adapted multiplier
    eta_k = random_node_values(rng, tree, k)
    eta = tree.lift(eta_k, k, 4)
    lhs = conditional_expect(eta * X, tree).at(k)
    rhs = np.maximum(eta_k, 0) * cX.at(k) + np.maximum(-eta_k, 0) * conditional_expect(-X, tree).at(k)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12
    # tower: E[E[X|k] | s] = E[X | s]
    inner = conditional_expect(X, tree, k)
    outer = conditional_expect(inner.terminal, tree)
    assert np.max(np.abs(outer.at(s) - cX.at(s))) <= 1e-12
    c = float(rng.normal())
    assert np.all(conditional_expect(np.full_like(X, c), tree).at(k) == pytest.approx(c, abs=1e-14))

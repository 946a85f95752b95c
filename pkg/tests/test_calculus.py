import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcalc.calculus import SimpleProcess, bochner_integral, ito_integral, mg_norm, qv_integral
from gcalc.errors import AdaptednessError, TreeMismatchError
from gcalc.sublinear import (
    NodeProcess,
    TimeGrid,
    VolatilityBand,
    build_tree,
    expect,
    expect_slice,
    random_node_values,
)

BAND = VolatilityBand(0.5, 1.0)


@pytest.fixture(scope="module")
def tree():
    return build_tree(TimeGrid.uniform(1.0, 4), BAND)


def random_simple(rng, tree, scale=1.0):
    return SimpleProcess(tree, tuple(random_node_values(rng, tree, k, scale) for k in range(tree.steps)))


def test_unit_integrand_recovers_paths(tree):
    one = SimpleProcess.constant(tree, 1.0)
    assert ito_integral(one, tree).max_abs_diff(NodeProcess.brownian(tree)) < 1e-15
    assert qv_integral(one, tree).max_abs_diff(NodeProcess.quadratic_variation(tree)) < 1e-15
    t = bochner_integral(one, tree)
    for k in range(5):
        assert np.allclose(t.at(k), tree.grid.times[k])


def test_zero_integrand(tree):
    zero = SimpleProcess.constant(tree, 0.0)
    for integral in (ito_integral, bochner_integral, qv_integral):
        assert all(np.all(v == 0) for v in integral(zero, tree).values)


def test_single_term(tree):
    coeffs = [np.full(tree.n_nodes(k), 2.0 if k == 0 else 0.0) for k in range(4)]
    I = ito_integral(SimpleProcess(tree, tuple(coeffs)), tree)
    for k in range(1, 5):
        assert np.allclose(I.at(k), 2.0 * tree.lift(tree.B[1], 1, k))
    coeffs[0] = np.full(1, 3.0)
    J = bochner_integral(SimpleProcess(tree, tuple(coeffs)), tree)
    assert all(np.allclose(J.at(k), 0.75) for k in range(1, 5))


def test_qv_on_high_branch(tree):
    one = SimpleProcess.constant(tree, 1.0)
    q = qv_integral(one, tree).terminal
    # the leaf reached by always choosing the top level and a fixed sign
    leaf = sum(3 * tree.branching**j for j in range(4))
    assert q[leaf] == pytest.approx(1.0)


def test_adaptedness_enforced(tree):
    with pytest.raises(AdaptednessError):
        SimpleProcess(tree, tuple(np.zeros(tree.n_nodes(k + 1)) for k in range(4)))
    with pytest.raises(AdaptednessError):
        SimpleProcess(tree, (np.zeros(1),))


def test_tree_mismatch(tree):
    other = build_tree(TimeGrid.uniform(1.0, 4), VolatilityBand(0.25, 1.0))
    with pytest.raises(TreeMismatchError):
        ito_integral(SimpleProcess.constant(other, 1.0), tree)


def test_mg_norm_examples(tree):
    assert mg_norm(NodeProcess.constant(tree, -3.0), 2, tree) == pytest.approx(3.0)
    assert mg_norm(NodeProcess.constant(tree, 0.0), 1, tree) == 0.0
    # left-endpoint sum of sigma_high_sq t_k dt
    dt = 0.25
    assert mg_norm(NodeProcess.brownian(tree), 2, tree) == pytest.approx(math.sqrt(dt * dt * 6))
    fine = build_tree(TimeGrid.uniform(1.0, 8), BAND)
    assert mg_norm(NodeProcess.brownian(fine), 2, fine) == pytest.approx(1 / math.sqrt(2), abs=0.1)
    with pytest.raises(ValueError):
        mg_norm(NodeProcess.brownian(tree), 0.5, tree)


def test_quadratic_variation_identity(tree):
    B = NodeProcess.brownian(tree)
    dev = B * B - ito_integral(SimpleProcess.from_process(B), tree) * 2.0 - NodeProcess.quadratic_variation(tree)
    assert max(float(np.max(np.abs(v))) for v in dev.values) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0))
def test_integral_identities(seed, scale):
    t = build_tree(TimeGrid.uniform(1.0, 4), BAND)
    rng = np.random.default_rng(seed)
    eta = random_simple(rng, t, scale)
    I = ito_integral(eta, t).terminal
    tol = 1e-10 * max(1.0, scale**2)
    assert abs(expect(I, t)) <= tol
    assert abs(expect(-I, t)) <= tol
    assert expect(I**2, t) == pytest.approx(expect(qv_integral(eta**2, t).terminal, t), abs=tol)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]))
def test_integral_inequalities(seed, p):
    t = build_tree(TimeGrid.uniform(1.0, 4), BAND)
    rng = np.random.default_rng(seed)
    eta = random_simple(rng, t)
    dt = t.grid.dt
    hi = BAND.sigma_high_sq
    I = ito_integral(eta, t).terminal
    ito_rhs = hi * sum(expect_slice(c**2, t, k) * dt[k] for k, c in enumerate(eta.coefficients))
    assert expect(I**2, t) <= ito_rhs + 1e-12
    qv_lhs = expect(np.abs(qv_integral(eta, t).terminal), t)
    assert qv_lhs <= hi * expect(bochner_integral(abs(eta), t).terminal, t) + 1e-12
    lhs = expect(bochner_integral(abs(eta) ** p, t).terminal, t)
    rhs = sum(expect_slice(np.abs(c) ** p, t, k) * dt[k] for k, c in enumerate(eta.coefficients))
    assert lhs <= rhs + 1e-12

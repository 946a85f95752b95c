import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcalc.errors import AssumptionError, BlowUpError, NonFiniteError
from gcalc.gsde import ContinuityModulus, ForwardCoefficients, check_assumptions, solve_forward
from gcalc.sublinear import (
    NodeProcess,
    TimeGrid,
    VolatilityBand,
    build_tree,
    conditional_expect,
    expect,
)

BAND = VolatilityBand(0.5, 1.0)


@pytest.fixture(scope="module")
def tree():
    return build_tree(TimeGrid.uniform(1.0, 5), BAND)


def test_deterministic_drift(tree):
    X = solve_forward(ForwardCoefficients(b=lambda t, x: 1.0), 0.0, tree)
    for k in range(6):
        assert np.allclose(X.at(k), tree.grid.times[k])


def test_pure_noise_is_brownian(tree):
    X = solve_forward(ForwardCoefficients(sigma=lambda t, x: 1.0), 0.0, tree)
    assert X.max_abs_diff(NodeProcess.brownian(tree)) < 1e-15
    Q = solve_forward(ForwardCoefficients(h=lambda t, x: 1.0), 0.0, tree)
    assert Q.max_abs_diff(NodeProcess.quadratic_variation(tree)) < 1e-15


def test_multiplicative_noise_is_martingale(tree):
    X = solve_forward(ForwardCoefficients(sigma=lambda t, x: x), 1.0, tree)
    cond = conditional_expect(X.terminal, tree)
    for k in range(6):
        assert np.max(np.abs(cond.at(k) - X.at(k))) <= 1e-12


def test_adapted_on_shared_prefixes(tree):
    X = solve_forward(ForwardCoefficients(b=lambda t, x: np.sin(x), sigma=lambda t, x: 0.3 * x + 1), 0.2, tree)
    # children of one node share its value's history: recompute depth 2 from depth 1 by hand
    x1 = X.at(1)
    dt = tree.grid.dt[1]
    manual = np.repeat(x1 + np.sin(x1) * dt, tree.branching) + np.repeat(0.3 * x1 + 1, tree.branching) * tree.dB[2]
    assert np.allclose(manual, X.at(2), atol=1e-15)


def test_classical_linear_mean():
    tree = build_tree(TimeGrid.uniform(1.0, 6), VolatilityBand(1.0, 1.0))
    a, c = 0.7, 0.2
    X = solve_forward(ForwardCoefficients(b=lambda t, x: a * x + c, sigma=lambda t, x: 0.5 * x), 1.0, tree)
    m = 1.0
    for _ in range(6):
        m = m + (a * m + c) / 6
    assert expect(X.terminal, tree) == pytest.approx(m, abs=1e-12)


def test_vector_state(tree):
    coeffs = ForwardCoefficients(
        b=lambda t, x: np.stack([x[:, 1], -x[:, 0]], axis=1), sigma=lambda t, x: np.ones_like(x), dim=2
    )
    X = solve_forward(coeffs, np.array([1.0, 0.0]), tree)
    assert X.dim == 2
    assert X.terminal.shape == (tree.n_leaves, 2)
    with pytest.raises(ValueError):
        solve_forward(coeffs, np.zeros(3), tree)


def test_non_finite_is_reported(tree):
    coeffs = ForwardCoefficients(b=lambda t, x: np.where(t > 0.5, np.inf, 0.0) + 0 * x)
    with pytest.raises(NonFiniteError, match="depth 3"):
        solve_forward(coeffs, 0.0, tree)


def test_audit_sin_passes():
    rep = check_assumptions(ForwardCoefficients(b=lambda t, x: np.sin(x), lipschitz=1.0))
    assert rep.passed
    assert rep.ratio("b") <= 1.0


def test_audit_square_fails_near_twenty():
    rep = check_assumptions(ForwardCoefficients(b=lambda t, x: x**2, lipschitz=1.0))
    assert not rep.passed
    assert rep.ratio("b") == pytest.approx(20.0, rel=1e-3)
    with pytest.raises(AssumptionError) as info:
        rep.raise_for_failures()
    assert info.value.report is rep


def test_audit_constants_ratio_zero():
    rep = check_assumptions(ForwardCoefficients(b=lambda t, x: 3.0, sigma=lambda t, x: -1.0, lipschitz=0.5))
    assert rep.passed
    assert all(e.ratio == 0.0 for e in rep.entries)


def test_audit_modulus_and_growth():
    rho = ContinuityModulus.log()
    coeffs = ForwardCoefficients(
        sigma=lambda t, x: np.sin(x),
        alpha=1.0,
        modulus=ContinuityModulus.linear(1.0),
        growth=(1.0, 0.0),
    )
    assert check_assumptions(coeffs).passed
    bad = ForwardCoefficients(sigma=lambda t, x: 2 * x, alpha=1.0, modulus=rho)
    assert not check_assumptions(bad).passed


@pytest.mark.parametrize("mod", [ContinuityModulus.linear(2.0), ContinuityModulus.log(), ContinuityModulus.log(0.05)])
def test_builtin_modulus_shape(mod):
    assert mod.audit() == []


@pytest.mark.parametrize("mod", [ContinuityModulus.linear(0.5), ContinuityModulus.log(), ContinuityModulus.log(0.1)])
@given(s=st.floats(1e-8, 50.0))
@settings(max_examples=50, deadline=None)
def test_osgood_round_trip(mod, s):
    assert mod.osgood_inverse(mod.osgood(s)) == pytest.approx(s, rel=1e-9)


def test_log_osgood_derivative():
    mod = ContinuityModulus.log()
    for s in (1e-4, 0.05, mod.r_star, 0.5, 3.0):
        h = s * 1e-6
        deriv = (mod.osgood(s + h) - mod.osgood(s - h)) / (2 * h)
        assert deriv == pytest.approx(1.0 / mod(s), rel=1e-5)


def test_custom_modulus_matches_linear():
    custom = ContinuityModulus("custom", func=lambda r: 2.0 * r)
    lin = ContinuityModulus.linear(2.0)
    y = lin.osgood(0.3) + 0.4
    assert custom.osgood_inverse(custom.osgood(0.3) + 0.4) == pytest.approx(lin.osgood_inverse(y), rel=1e-8)


def test_custom_modulus_blow_up():
    # rho(r) = r^2 is not Osgood: v is bounded above, so large targets are unreachable
    sq = ContinuityModulus("custom", func=lambda r: r**2)
    with pytest.raises(BlowUpError):
        sq.osgood_inverse(10.0)


def test_modulus_validation():
    with pytest.raises(ValueError):
        ContinuityModulus.log(0.5)
    with pytest.raises(ValueError):
        ContinuityModulus.linear(0.0)
    with pytest.raises(ValueError):
        ContinuityModulus("custom")


def test_lipschitz_mode_defaults():
    c = ForwardCoefficients(lipschitz=2.0)
    assert c.alpha_sq(0.0) == 12.0
    assert c.effective_modulus() == ContinuityModulus.linear(1.0)
    assert ForwardCoefficients().effective_modulus() is None
    assert math.isclose(ForwardCoefficients(alpha=lambda t: 1 + t).alpha_sq(1.0), 4.0)

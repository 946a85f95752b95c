"""Property suite behind ``gcalc verify``.

Every check is seeded and free of timing data, so two runs with the same
configuration produce identical output whatever the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..calculus import SimpleProcess, bochner_integral, ito_integral, qv_integral
from ..gfbsde import contraction_check, solve_fbsde
from ..gsde import ContinuityModulus
from ..stability import CONCAVE_FAMILIES, bihari_bound, bihari_residual, jensen_check, run_experiment
from ..stability.families import (
    additive_drift,
    bsde_driver_shift,
    bsde_terminal_shift,
    fbsde_driver_shift,
    fbsde_initial_shift,
    lipschitz_drift,
)
from ..sublinear import (
    CylinderFunctional,
    Lattice,
    NodeProcess,
    TimeGrid,
    VolatilityBand,
    brute_force_expect,
    build_tree,
    conditional_expect,
    expect,
    expect_slice,
    leaf_values,
    lower_expect,
    random_functionals,
    random_node_values,
)

EXACT_MAX_STEPS = 8
ORACLE_MAX_STEPS = 6


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class VerifyResult:
    checks: list
    reports: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and all(r.passed for r in self.reports.values())


def _err(worst, tol, name, **detail) -> CheckResult:
    worst = float(worst)
    return CheckResult(name, bool(worst <= tol), worst, tol, detail)


def check_envelope(band, horizon, steps) -> CheckResult:
    tree = build_tree(TimeGrid.uniform(horizon, steps), band)
    bt2 = CylinderFunctional((steps,), lambda x: x[..., 0] ** 2, name="bt_squared")
    up, lo = expect(bt2, tree), lower_expect(bt2, tree)
    worst = max(abs(up - band.sigma_high_sq * horizon), abs(lo - band.sigma_low_sq * horizon))
    return _err(worst, 1e-10, "moment-envelope", upper=up, lower=lo)


def check_oracle(band, horizon, steps, seed, count=20) -> CheckResult:
    worst = 0.0
    for n in range(1, steps + 1):
        tree = build_tree(TimeGrid.uniform(horizon, n), band)
        for X in random_functionals(seed + n, count, n):
            worst = max(worst, abs(expect(X, tree) - brute_force_expect(X, tree)))
    return _err(worst, 1e-9, "oracle-equivalence", max_steps=steps, functionals=count)


def check_axioms(band, horizon, steps, seed, pairs=100) -> CheckResult:
    """Sublinearity axioms at the root and the conditional properties node-wise."""
    tree = build_tree(TimeGrid.uniform(horizon, steps), band)
    rng = np.random.default_rng(seed)
    fs = random_functionals(seed, 2 * pairs, steps)
    worst = 0.0
    violations = {}

    def note(name, v):
        nonlocal worst
        worst = max(worst, v)
        violations[name] = max(violations.get(name, 0.0), v)

    n = tree.steps
    for i in range(pairs):
        X = leaf_values(fs[2 * i], tree)
        Y = leaf_values(fs[2 * i + 1], tree)
        Z = X + np.abs(Y)
        c = float(rng.uniform(-3, 3))
        lam = float(rng.uniform(0, 3))
        eX, eY = expect(X, tree), expect(Y, tree)
        note("monotone", max(0.0, expect(X, tree) - expect(Z, tree)))
        note("constant", abs(expect(np.full_like(X, c), tree) - c))
        note("subadditive", max(0.0, expect(X + Y, tree) - eX - eY))
        note("homogeneous", abs(expect(lam * X, tree) - lam * eX))
        note("translation", abs(expect(X + c, tree) - (eX + c)))
        cX, cY, cZ = (conditional_expect(V, tree) for V in (X, Y, Z))
        cXY = conditional_expect(X - Y, tree)
        k = int(rng.integers(0, n + 1))
        s = int(rng.integers(0, k + 1))
        eta = tree.lift(random_node_values(rng, tree, k), k, n)
        ceta = conditional_expect(eta * X, tree)
        cneg = conditional_expect(-X, tree)
        inner = conditional_expect(X, tree, k)
        outer = conditional_expect(inner.terminal, tree)
        eta_k = eta.reshape(tree.n_nodes(k), -1)[:, 0]
        for j in range(n + 1):
            note("cond-monotone", max(0.0, float(np.max(cX.at(j) - cZ.at(j)))))
            note("cond-subadditive", max(0.0, float(np.max(cX.at(j) - cY.at(j) - cXY.at(j)))))
        rhs = np.maximum(eta_k, 0) * cX.at(k) + np.maximum(-eta_k, 0) * cneg.at(k)
        note("cond-homogeneous", float(np.max(np.abs(ceta.at(k) - rhs))))
        note("tower", float(np.max(np.abs(outer.at(s) - cX.at(s)))))
        note("tower-root", abs(float(outer.at(0)[0]) - eX))
    return _err(worst, 1e-12, "axioms", pairs=pairs, violations=violations)


def check_ito(band, horizon, steps, seed, count=100) -> CheckResult:
    tree = build_tree(TimeGrid.uniform(horizon, steps), band)
    rng = np.random.default_rng(seed)
    hi = band.sigma_high_sq
    n = tree.steps
    dt = tree.grid.dt
    ident = ineq = 0.0
    for _ in range(count):
        eta = SimpleProcess(tree, tuple(random_node_values(rng, tree, k) for k in range(n)))
        I = ito_integral(eta, tree).terminal
        zero = max(abs(expect(I, tree)), abs(expect(-I, tree)))
        iso = abs(expect(I**2, tree) - expect(qv_integral(eta**2, tree).terminal, tree))
        ident = max(ident, zero, iso)
        # upper bound by the quadratic-variation envelope
        rhs = hi * sum(expect_slice(c**2, tree, k) * dt[k] for k, c in enumerate(eta.coefficients))
        ineq = max(ineq, expect(I**2, tree) - rhs)
        qv_abs = expect(np.abs(qv_integral(eta, tree).terminal), tree)
        ineq = max(ineq, qv_abs - hi * expect(bochner_integral(abs(eta), tree).terminal, tree))
        for p in (1, 2, 3):
            lhs = expect(bochner_integral(abs(eta) ** p, tree).terminal, tree)
            rhs = sum(expect_slice(np.abs(c) ** p, tree, k) * dt[k] for k, c in enumerate(eta.coefficients))
            ineq = max(ineq, lhs - rhs)
    B = NodeProcess.brownian(tree)
    qv = NodeProcess.quadratic_variation(tree)
    dev = (B * B - ito_integral(SimpleProcess.from_process(B), tree) * 2.0) - qv
    path = max(float(np.max(np.abs(v))) for v in dev.values)
    passed = ident <= 1e-10 and ineq <= 1e-12 and path <= 1e-12
    return CheckResult(
        "ito-identities",
        passed,
        max(ident, path),
        1e-10,
        {"identity": ident, "inequality_excess": max(ineq, 0.0), "qv_path": path, "processes": count},
    )


def check_classical(horizon, steps, seed, count=10) -> CheckResult:
    band = VolatilityBand(1.0, 1.0)
    tree = build_tree(TimeGrid.uniform(horizon, steps), band)
    worst = 0.0
    for X in random_functionals(seed, count, steps):
        # one level: every leaf has weight 2^-N, so the expectation is the plain mean
        worst = max(worst, abs(expect(X, tree) - float(np.mean(leaf_values(X, tree)))))
    return _err(worst, 1e-12, "classical-limit", functionals=count)


def check_jensen(band, horizon, steps, seed, count=50) -> CheckResult:
    tree = build_tree(TimeGrid.uniform(horizon, steps), band)
    worst = math.inf
    fams = ("exp-saturation", "log-sigmoid", "capped")
    for X in random_functionals(seed, count, steps):
        for name in fams:
            worst = min(worst, jensen_check(X, CONCAVE_FAMILIES[name], tree).worst_margin)
    return CheckResult("jensen", worst >= -1e-12, worst, 1e-12, {"functionals": count, "families": list(fams)})


def check_bihari() -> CheckResult:
    lin = ContinuityModulus.linear(1.0)
    zero = max(abs(bihari_bound(0.0, 1.0, m, 1.0)) for m in (lin, ContinuityModulus.log()))
    closed = max(
        abs(bihari_bound(a, beta, lin, t) - a * math.exp(beta * t))
        for a, beta, t in ((1.0, 1.0, 1.0), (2.0, 0.5, 2.0), (0.3, 2.0, 0.7))
    )
    resid = max(
        abs(bihari_residual(a, 1.0, m, 0.5)) for a in (0.01, 0.1) for m in (lin, ContinuityModulus.log())
    )
    passed = zero == 0.0 and closed <= 1e-6 and resid <= 1e-6
    return CheckResult("bihari", passed, max(closed, resid), 1e-6, {"zero": zero, "closed_form": closed, "residual": resid})


def check_g_normal(band, seed) -> CheckResult:
    """``phi(a B_1 + b (B_2 - B_1))`` against ``phi(sqrt(a^2 + b^2) B_1)`` on a 200-per-unit lattice."""
    rng = np.random.default_rng(seed)
    two = Lattice(TimeGrid.uniform(2.0, 400), band)
    one = Lattice(TimeGrid.uniform(1.0, 200), band)
    worst = 0.0
    for a, b in ((1, 1), (2, 1), (1, 3)):
        r = math.hypot(a, b)
        for _ in range(3):
            w, s = rng.uniform(-1, 1, 2)
            phi = lambda z, w=w, s=s: w * z + np.abs(z - s)
            lhs = two.expect(CylinderFunctional((200, 400), lambda x, phi=phi, a=a, b=b: phi(a * x[..., 0] + b * (x[..., 1] - x[..., 0]))))
            rhs = one.expect(CylinderFunctional((200,), lambda x, phi=phi, r=r: phi(r * x[..., 0])))
            worst = max(worst, abs(lhs - rhs))
    return _err(worst, 1e-2, "g-normal")


def check_fbsde(band, horizon, steps) -> CheckResult:
    tree = build_tree(TimeGrid.uniform(horizon, steps), band)
    factor, ok = contraction_check(0.1, horizon)
    data = fbsde_driver_shift(steps).data(0.0)
    res = solve_fbsde(data, tree)
    h = res.residual_history
    ratios = [b / a for a, b in zip(h, h[1:]) if a > 1e-13]
    worst = max(ratios, default=0.0)
    return CheckResult(
        "fbsde-contraction",
        ok and worst <= factor + 0.05,
        worst,
        factor + 0.05,
        {"factor": factor, "iterations": res.iterations},
    )


def stability_reports(band, horizon, steps) -> dict:
    tree = build_tree(TimeGrid.uniform(horizon, steps), band)
    times = sorted({0.0, float(tree.grid.times[steps // 2]), horizon})
    fams = (
        additive_drift(),
        lipschitz_drift(),
        bsde_terminal_shift(steps),
        bsde_driver_shift(steps),
        fbsde_initial_shift(steps),
        fbsde_driver_shift(steps),
    )
    return {f"{f.kind}-{f.name}": run_experiment(f, tree, times) for f in fams}


def run_verify(band: VolatilityBand, horizon: float, steps: int, seed: int = 0) -> VerifyResult:
    n_exact = min(steps, EXACT_MAX_STEPS)
    n_oracle = min(steps, ORACLE_MAX_STEPS)
    checks = [
        check_envelope(band, horizon, n_exact),
        check_oracle(band, horizon, n_oracle, seed),
        check_axioms(band, horizon, n_oracle, seed),
        check_ito(band, horizon, n_oracle, seed),
        check_classical(horizon, n_exact, seed),
        check_jensen(band, horizon, n_oracle, seed),
        check_bihari(),
        check_g_normal(band, seed),
        check_fbsde(band, min(horizon, 1.0), n_oracle),
    ]
    return VerifyResult(checks, stability_reports(band, horizon, n_oracle))

"""Perturbation experiments for forward, backward and coupled G-equations.

Base and perturbed equations are always solved on the same tree, so
every scenario sees identical increments and the same adversary. Gaps
are G-expectations of the pathwise difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .._parallel import pmap
from ..errors import ContractionError
from ..gbsde import BackwardDrivers, check_drivers, solve_backward
from ..gfbsde import FbsdeData, contraction_check, solve_fbsde
from ..gsde import ContinuityModulus, ForwardCoefficients, check_assumptions, solve_forward
from ..sublinear import ScenarioTree, expect_slice, leaf_values
from .bounds import bihari_bound
from .report import StabilityReport, StabilityRow

# (a_1 + ... + a_7)^2 <= 7 (a_1^2 + ... + a_7^2)
EXPANSION_CONSTANT = 7.0

KINDS = ("sde", "bsde", "fbsde")


@dataclass(frozen=True)
class PerturbationFamily:
    """Parameterized data ``eps -> data`` with ``eps`` decreasing to 0.

    ``generator(eps)`` returns ``(ForwardCoefficients, x0)`` for ``sde``,
    ``(BackwardDrivers, xi)`` for ``bsde`` and :class:`FbsdeData` for
    ``fbsde``. The base data is ``generator(0.0)``.
    """

    kind: str
    params: tuple
    generator: Callable
    name: str = "family"
    convergence: str = "coefficient-L2"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        params = tuple(float(p) for p in self.params)
        if any(p < 0 for p in params):
            raise ValueError("perturbation parameters must be >= 0")
        if any(b > a for a, b in zip(params, params[1:])):
            raise ValueError("perturbation parameters must be nonincreasing")
        object.__setattr__(self, "params", params)

    @property
    def base(self):
        return self.generator(0.0)

    def data(self, eps: float):
        return self.generator(float(eps))


def _indices(tree: ScenarioTree, times, default: int) -> list:
    if times is None:
        return [default]
    return [tree.grid.index_of(float(t)) for t in times]


def _sq(a):
    return a**2 if a.ndim == 1 else (a**2).sum(axis=-1)


def _abs(a):
    return np.abs(a) if a.ndim == 1 else np.linalg.norm(a, axis=-1)


def _verdicts(report: StabilityReport, floor: float):
    rows = report.rows
    out = {}
    ts = sorted({r.t for r in rows})
    zero_rows = [r for r in rows if r.param == 0.0]
    if zero_rows:
        out["zero_at_zero"] = all(r.gap <= 1e-14 for r in zero_rows)
    ratios = []
    nonincreasing = strict = True
    for t in ts:
        seq = [r.gap for r in rows if r.t == t and r.param > 0]
        # at t = T a driver-only perturbation leaves Y untouched; nothing to order
        if len(seq) >= 2 and max(seq) > 1e-15:
            nonincreasing &= all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(seq, seq[1:]))
            strict &= all(b < a for a, b in zip(seq, seq[1:]))
            if seq[0] > 0:
                ratios.append(seq[-1] / seq[0])
    out["nonincreasing"] = nonincreasing
    out["strictly_decreasing"] = strict
    if ratios:
        out["final_over_first"] = max(ratios)
        out["below_floor"] = max(ratios) <= floor
    bounded = [r for r in rows if r.bound is not None]
    if bounded:
        out["within_bound"] = all(r.verdict == "ok" for r in bounded)
    return out


def _row(param, t, gap, bound, coeff_gap) -> StabilityRow:
    if bound is None:
        verdict = "no-bound"
    else:
        verdict = "ok" if gap <= bound * (1 + 1e-10) + 1e-15 else "violated"
    return StabilityRow(float(param), float(t), float(gap), bound, float(coeff_gap), verdict)


def sde_stability_experiment(
    fam: PerturbationFamily,
    tree: ScenarioTree,
    times: Sequence[float] | None = None,
    audit: bool = True,
    floor: float = 1e-2,
) -> StabilityReport:
    """Gaps ``E|X^eps_t - X^0_t|^2`` against the Gronwall/Bihari bound.

    The coefficient gap ``C^eps(T)`` collects the seven squared terms of
    the expansion with ``C = 7``; the ``dt``, ``d<B>`` and ``dB`` sums are
    bounded with the common factor
    ``kappa = max(T, sigma_high_sq^2 T, sigma_high_sq)``, so
    ``C_2 = 7 kappa`` (``kappa = 1`` when ``T = sigma_high_sq = 1``).
    ``times`` defaults to the horizon.
    """
    base_coeffs, base_x0 = fam.base
    idx = _indices(tree, times, tree.steps)
    T = tree.grid.horizon
    hi = tree.band.sigma_high_sq
    kappa = max(T, hi**2 * T, hi)
    c2 = EXPANSION_CONSTANT * kappa
    if audit:
        check_assumptions(base_coeffs, horizon=T).raise_for_failures(f"{fam.name} base")
    X0 = solve_forward(base_coeffs, base_x0, tree)
    t, dt = tree.grid.times, tree.grid.dt
    rho = base_coeffs.effective_modulus()

    def one(eps):
        coeffs, x0 = fam.data(eps)
        if audit:
            check_assumptions(coeffs, horizon=T).raise_for_failures(f"{fam.name} eps={eps}")
        Xe = solve_forward(coeffs, x0, tree)
        integral = 0.0
        for (_, phi_e), (_, phi_0) in zip(coeffs.items(), base_coeffs.items()):
            for j in range(tree.steps):
                x = X0.at(j)
                d = np.broadcast_to(np.asarray(phi_e(t[j], x), float), x.shape) - np.broadcast_to(
                    np.asarray(phi_0(t[j], x), float), x.shape
                )
                integral += expect_slice(_sq(d), tree, j) * dt[j]
        init_gap = float(np.sum((np.asarray(x0, float) - np.asarray(base_x0, float)) ** 2))
        coeff_gap = EXPANSION_CONSTANT * (kappa * integral + init_gap)
        rows = []
        for k in idx:
            gap = expect_slice(_sq(Xe.at(k) - X0.at(k)), tree, k)
            bound = None
            if rho is not None and coeffs.alpha_sq(0.0) is not None:
                if callable(coeffs.alpha):
                    beta = lambda s: c2 * coeffs.alpha_sq(s)
                else:
                    beta = c2 * coeffs.alpha_sq(0.0)
                bound = bihari_bound(coeff_gap, beta, rho, t[k])
            rows.append(_row(eps, t[k], gap, bound, coeff_gap))
        return rows

    rows = [r for chunk in pmap(one, fam.params) for r in chunk]
    report = StabilityReport(
        "sde",
        fam.name,
        rows,
        constants={
            "C": EXPANSION_CONSTANT,
            "kappa": kappa,
            "C2": c2,
            "alpha_sq": base_coeffs.alpha_sq(0.0),
            "modulus": None if rho is None else rho.family,
            "mode": "lipschitz" if base_coeffs.lipschitz is not None and base_coeffs.modulus is None else "integral-lipschitz",
            "convergence": fam.convergence,
        },
    )
    report.verdicts = _verdicts(report, floor)
    return report


def bsde_stability_experiment(
    fam: PerturbationFamily,
    tree: ScenarioTree,
    times: Sequence[float] | None = None,
    audit: bool = True,
    floor: float = 1e-2,
    step_tol: float = 1e-13,
) -> StabilityReport:
    """L1 gaps ``E|Y^delta_t - Y^0_t|``.

    ``C^delta(0) = E|xi_hat| + int E|f^delta(Y^0) - f^0(Y^0)| +
    sigma_high_sq int E|g^delta(Y^0) - g^0(Y^0)|``. With Lipschitz drivers
    ``|df| + |dg| <= 2 C0 |dy|``; the bound at ``t`` is the Bihari bound run
    backwards over ``T - t`` with weight ``K1 = max(1, sigma_high_sq)``.
    ``times`` defaults to 0, where a driver perturbation has had the whole
    horizon to act.
    """
    base_drv, base_xi = fam.base
    idx = _indices(tree, times, 0)
    T = tree.grid.horizon
    hi = tree.band.sigma_high_sq
    k1 = max(1.0, hi)
    if audit:
        check_drivers(base_drv, horizon=T).raise_for_failures(f"{fam.name} base")
    Y0 = solve_backward(base_drv, base_xi, tree, step_tol=step_tol)
    xi0 = np.asarray(leaf_values(base_xi, tree), float)
    t, dt = tree.grid.times, tree.grid.dt
    if base_drv.modulus is not None:
        rho = base_drv.modulus
    elif base_drv.lipschitz is not None:
        rho = ContinuityModulus.linear(max(2.0 * base_drv.lipschitz, 1e-300))
    else:
        rho = None

    def one(delta):
        drv, xi = fam.data(delta)
        if audit:
            check_drivers(drv, horizon=T).raise_for_failures(f"{fam.name} delta={delta}")
        Yd = solve_backward(drv, xi, tree, step_tol=step_tol)
        xi_gap = expect_slice(_abs(np.asarray(leaf_values(xi, tree), float) - xi0), tree, tree.steps)
        integral = 0.0
        for j in range(tree.steps):
            y = Y0.at(j)
            for (name, phi_d), (_, phi_0) in zip(drv.items(), base_drv.items()):
                d = np.broadcast_to(np.asarray(phi_d(t[j], y), float), y.shape) - np.broadcast_to(
                    np.asarray(phi_0(t[j], y), float), y.shape
                )
                weight = hi if name == "g" else 1.0
                integral += weight * expect_slice(_abs(d), tree, j) * dt[j]
        coeff_gap = xi_gap + integral
        rows = []
        for k in idx:
            gap = expect_slice(_abs(Yd.at(k) - Y0.at(k)), tree, k)
            bound = None if rho is None else bihari_bound(coeff_gap, k1, rho, T - t[k])
            rows.append(_row(delta, t[k], gap, bound, coeff_gap))
        return rows

    rows = [r for chunk in pmap(one, fam.params) for r in chunk]
    report = StabilityReport(
        "bsde",
        fam.name,
        rows,
        constants={
            "K1": k1,
            "g_weight": hi,
            "modulus": None if rho is None else rho.family,
            "mode": "lipschitz" if base_drv.modulus is None else "integral-lipschitz",
            "convergence": fam.convergence,
        },
    )
    report.verdicts = _verdicts(report, floor)
    return report


def fbsde_stability_experiment(
    fam: PerturbationFamily,
    tree: ScenarioTree,
    times: Sequence[float] | None = None,
    floor: float = 1e-2,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> StabilityReport:
    """Joint gaps ``E[|X^g_t - X^0_t|^2 + |Y^g_t - Y^0_t|^2]``.

    No explicit rate bound is attached (the ``bound`` column stays empty);
    the coefficient gap sums the squared coefficient, initial and terminal
    deviations along the base solution. ``times`` defaults to 0.
    """
    idx = _indices(tree, times, 0)
    T = tree.grid.horizon
    for gamma in (0.0, *fam.params):
        data = fam.data(gamma)
        factor, ok = contraction_check(data.K, T)
        if not ok:
            raise ContractionError(
                f"{fam.name} at gamma={gamma}: contraction factor {factor:.4f} is not < 1"
            )
    base = fam.base
    sol0 = solve_fbsde(base, tree, tol=tol, max_iter=max_iter).pair
    X0, Y0 = sol0.X, sol0.Y
    xi0 = np.asarray(leaf_values(base.xi, tree), float)
    t, dt = tree.grid.times, tree.grid.dt

    def one(gamma):
        data = fam.data(gamma)
        sol = solve_fbsde(data, tree, tol=tol, max_iter=max_iter).pair
        integral = 0.0
        for j in range(tree.steps):
            x, y = X0.at(j), Y0.at(j)
            for (_, phi_g), (_, phi_0) in zip(data.items(), base.items()):
                d = np.broadcast_to(np.asarray(phi_g(t[j], x, y), float), x.shape) - np.broadcast_to(
                    np.asarray(phi_0(t[j], x, y), float), x.shape
                )
                integral += expect_slice(d**2, tree, j) * dt[j]
        xi_gap = expect_slice((np.asarray(leaf_values(data.xi, tree), float) - xi0) ** 2, tree, tree.steps)
        coeff_gap = integral + (data.x0 - base.x0) ** 2 + xi_gap
        rows = []
        for k in idx:
            joint = (sol.X.at(k) - X0.at(k)) ** 2 + (sol.Y.at(k) - Y0.at(k)) ** 2
            rows.append(_row(gamma, t[k], expect_slice(joint, tree, k), None, coeff_gap))
        return rows

    rows = [r for chunk in pmap(one, fam.params) for r in chunk]
    report = StabilityReport(
        "fbsde",
        fam.name,
        rows,
        constants={"K": base.K, "factor": contraction_check(base.K, T)[0], "convergence": fam.convergence},
    )
    report.verdicts = _verdicts(report, floor)
    return report


def run_experiment(fam: PerturbationFamily, tree: ScenarioTree, times=None, **kw) -> StabilityReport:
    runner = {
        "sde": sde_stability_experiment,
        "bsde": bsde_stability_experiment,
        "fbsde": fbsde_stability_experiment,
    }[fam.kind]
    return runner(fam, tree, times, **kw)

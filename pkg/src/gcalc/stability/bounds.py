"""Bihari-type bound and the conditional Jensen inequality on the tree."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from ..errors import AssumptionError, BlowUpError
from ..gsde import ContinuityModulus
from ..sublinear import ScenarioTree, conditional_expect, leaf_values


def integrate_beta(beta, t: float, t0: float = 0.0) -> float:
    if not callable(beta):
        return float(beta) * (t - t0)
    val, _ = integrate.quad(beta, t0, t, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def bihari_bound(a: float, beta, rho: ContinuityModulus, t: float) -> float:
    """Upper bound on ``u(t)`` when ``u(t) <= a + int_0^t beta(s) rho(u(s)) ds``.

    Returns 0 for ``a = 0`` and ``v^-1(v(a) + int_0^t beta)`` otherwise,
    where ``v`` is the Osgood function of ``rho``. ``beta`` is a
    nonnegative constant or callable.
    """
    if a < 0:
        raise ValueError("a must be >= 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    if a == 0:
        return 0.0
    y = rho.osgood(a) + integrate_beta(beta, t)
    if not math.isfinite(y):
        raise BlowUpError(f"v(a) + int beta = {y} is outside the range of v")
    try:
        out = rho.osgood_inverse(y)
    except OverflowError as exc:
        raise BlowUpError(f"bound overflows at t={t}: v(a) + int beta = {y}") from exc
    if not math.isfinite(out):
        raise BlowUpError(f"bound blows up at t={t}")
    return out


def bihari_residual(a: float, beta, rho: ContinuityModulus, t: float) -> float:
    """``u(t) - (a + int_0^t beta rho(u))`` for ``u`` the bound itself.

    The bound solves ``u' = beta rho(u)``, so this should vanish up to
    quadrature error.
    """
    beta_fn = beta if callable(beta) else (lambda s: float(beta))
    rhs, _ = integrate.quad(
        lambda s: beta_fn(s) * rho(bihari_bound(a, beta, rho, s)), 0.0, t, limit=200, epsabs=1e-12, epsrel=1e-12
    )
    return bihari_bound(a, beta, rho, t) - (a + rhs)


@dataclass(frozen=True)
class ConcaveFunction:
    """Concave increasing map on R used for the conditional Jensen check."""

    name: str
    func: Callable = field(repr=False)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def audit(self, lo: float = -20.0, hi: float = 20.0, samples: int = 4001) -> list:
        x = np.linspace(lo, hi, samples)
        y = self(x)
        problems = []
        if np.any(np.diff(y) < -1e-15):
            problems.append("not increasing")
        second = y[:-2] + y[2:] - 2 * y[1:-1]
        if np.any(second > 1e-12 * max(1.0, float(np.abs(y).max()))):
            problems.append("not concave")
        return problems


CONCAVE_FAMILIES = {
    "linear": ConcaveFunction("linear", lambda x: 2.0 * x + 1.0),
    "exp-saturation": ConcaveFunction("exp-saturation", lambda x: 1.0 - np.exp(-x)),
    "log-sigmoid": ConcaveFunction("log-sigmoid", lambda x: -np.logaddexp(0.0, -x)),
    "capped": ConcaveFunction("capped", lambda x: np.minimum(x, 0.5 * x + 0.25)),
}


@dataclass
class JensenReport:
    worst_margin: float
    margins: dict
    passed: bool
    tolerance: float
    root_margin: float


def jensen_check(
    X,
    rho: ConcaveFunction | Callable,
    tree: ScenarioTree,
    depths: Sequence[int] | None = None,
    tolerance: float = 1e-12,
) -> JensenReport:
    """Check ``rho(E[X | Omega_k]) >= E[rho(X) | Omega_k]`` node-wise.

    Margins are ``lhs - rhs``; the check passes when every margin is at
    least ``-tolerance``.
    """
    if not isinstance(rho, ConcaveFunction):
        rho = ConcaveFunction(getattr(rho, "__name__", "rho"), rho)
    problems = rho.audit()
    if problems:
        raise AssumptionError(f"{rho.name} is {', '.join(problems)}")
    if depths is None:
        depths = range(tree.steps + 1)
    leaves = leaf_values(X, tree)
    cond = conditional_expect(leaves, tree)
    cond_rho = conditional_expect(rho(leaves), tree)
    margins = {}
    for k in depths:
        margins[int(k)] = float(np.min(rho(cond.at(k)) - cond_rho.at(k)))
    worst = min(margins.values())
    root = float(rho(cond.at(0))[0] - cond_rho.at(0)[0])
    return JensenReport(worst, margins, worst >= -tolerance, tolerance, root)

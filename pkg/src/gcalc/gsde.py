"""Forward G-SDEs on the scenario tree.

    X_t = X_0 + int b(s, X_s) ds + int h(s, X_s) d<B>_s + int sigma(s, X_s) dB_s

Coefficients are vectorized callables ``phi(t, x)``: ``t`` is a float and
``x`` holds one state per node (shape ``(nodes,)`` or ``(nodes, n)``);
the result must broadcast to ``x.shape``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import AssumptionError, BlowUpError, NonFiniteError
from .sublinear import NodeProcess, ScenarioTree


def _zero(t, x):
    return 0.0


@dataclass(frozen=True)
class ContinuityModulus:
    """Concave increasing ``rho`` with ``rho(0+) = 0`` and divergent ``int_0 dr/rho``.

    Built-in families (both Osgood, i.e. ``int_0^1 dr / rho = inf``):

    * ``linear``: ``rho(r) = c r``
    * ``log``: ``rho(r) = r ln(1/r)`` for ``r < r_star`` and its tangent line
      beyond, ``r_star < 1/e``

    ``custom`` wraps an arbitrary callable; its Osgood function is then
    computed by quadrature and inverted by root finding.
    """

    family: str = "linear"
    c: float = 1.0
    r_star: float = math.exp(-2.0)
    func: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family == "linear":
            if not self.c > 0:
                raise ValueError("linear modulus needs c > 0")
        elif self.family == "log":
            if not 0 < self.r_star < math.exp(-1.0):
                raise ValueError("log modulus needs 0 < r_star < 1/e")
        elif self.family == "custom":
            if self.func is None:
                raise ValueError("custom modulus needs func")
        else:
            raise ValueError(f"unknown modulus family {self.family!r}")

    @classmethod
    def linear(cls, c: float = 1.0) -> "ContinuityModulus":
        return cls("linear", c=c)

    @classmethod
    def log(cls, r_star: float = math.exp(-2.0)) -> "ContinuityModulus":
        return cls("log", r_star=r_star)

    @property
    def _slope(self) -> float:
        return math.log(1.0 / self.r_star) - 1.0

    @property
    def _rho_star(self) -> float:
        return self.r_star * math.log(1.0 / self.r_star)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "linear":
            out = self.c * r
        elif self.family == "log":
            rs = self.r_star
            safe = np.clip(r, 1e-300, rs)
            small = safe * np.log(1.0 / safe)
            out = np.where(r < rs, np.where(r > 0, small, 0.0), self._rho_star + self._slope * (r - rs))
        else:
            out = np.asarray(self.func(r), dtype=float)
        return float(out) if out.ndim == 0 else out

    def osgood(self, s: float) -> float:
        """``v(s) = int_{t0}^s dr / rho(r)`` for a family-specific fixed ``t0``."""
        if s <= 0:
            return -math.inf
        if self.family == "linear":
            return math.log(s) / self.c
        if self.family == "log":
            if s <= self.r_star:
                return -math.log(math.log(1.0 / s))
            v_star = -math.log(math.log(1.0 / self.r_star))
            return v_star + math.log(self(s) / self._rho_star) / self._slope
        # substitute r = e^u: the integrand e^u / rho(e^u) is tame near r = 0
        with np.errstate(over="ignore"):
            val, _ = integrate.quad(lambda u: math.exp(u) / self(math.exp(u)), 0.0, math.log(s), limit=400)
        return val

    def osgood_inverse(self, y: float) -> float:
        if self.family == "linear":
            return math.exp(self.c * y)
        if self.family == "log":
            v_star = -math.log(math.log(1.0 / self.r_star))
            if y <= v_star:
                return math.exp(-math.exp(-y))
            target = self._rho_star * math.exp(self._slope * (y - v_star))
            return self.r_star + (target - self._rho_star) / self._slope
        lo, hi = 1e-300, 1.0
        g = lambda s: self.osgood(s) - y
        for _ in range(200):
            if g(hi) >= 0:
                break
            lo, hi = hi, hi * 2.0
        else:
            raise BlowUpError(f"v^-1({y}) is beyond the range of the Osgood function")
        if g(lo) > 0:
            lo = 1e-300
            if g(lo) > 0:
                raise BlowUpError(f"v^-1({y}) is below the range of the Osgood function")
        return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-13)

    def audit(self, r_max: float = 10.0, samples: int = 2001) -> list[str]:
        """Sampled checks of monotonicity, concavity and ``rho(0+) = 0``."""
        problems = []
        r = np.linspace(r_max / samples, r_max, samples)
        y = np.asarray(self(r))
        if np.any(np.diff(y) <= 0):
            problems.append("not increasing on the sample grid")
        if np.any(y[:-2] + y[2:] - 2 * y[1:-1] > 1e-12 * np.abs(y[1:-1]).max()):
            problems.append("not concave on the sample grid")
        if not self(1e-12) < 1e-6:
            problems.append("rho(0+) is not numerically 0")
        return problems


@dataclass(frozen=True)
class ForwardCoefficients:
    """Coefficients ``b, h, sigma`` with declared regularity.

    ``lipschitz`` is the common constant of the Lipschitz mode. The
    integral-Lipschitz mode declares ``alpha`` (float or callable of ``t``)
    and ``modulus`` with
    ``|db|^2 + |dh|^2 + |dsigma|^2 <= alpha(t)^2 rho(|x1 - x2|^2)``.
    ``growth = (alpha1, alpha2)`` declares
    ``|b|^2 + |h|^2 + |sigma|^2 <= alpha1^2 + alpha2^2 |x|^2``.
    """

    b: Callable = _zero
    h: Callable = _zero
    sigma: Callable = _zero
    dim: int | None = None
    lipschitz: float | None = None
    alpha: float | Callable | None = None
    modulus: ContinuityModulus | None = None
    growth: tuple | None = None
    name: str = "coefficients"

    def items(self):
        return (("b", self.b), ("h", self.h), ("sigma", self.sigma))

    def alpha_sq(self, t):
        """Squared modulus weight; Lipschitz mode maps to ``3 C0^2`` with linear rho."""
        if self.alpha is not None:
            a = self.alpha(t) if callable(self.alpha) else self.alpha
            return float(a) ** 2
        if self.lipschitz is not None:
            return 3.0 * self.lipschitz**2
        return None

    def effective_modulus(self) -> ContinuityModulus | None:
        if self.modulus is not None:
            return self.modulus
        if self.lipschitz is not None:
            return ContinuityModulus.linear(1.0)
        return None


def _eval(fn, t, x, what, depth):
    out = np.broadcast_to(np.asarray(fn(t, x), dtype=float), x.shape)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise NonFiniteError(
            f"{what} is not finite at depth {depth} (t={t}), node {int(bad[0])}"
        )
    return out


def solve_forward(coeffs: ForwardCoefficients, x0, tree: ScenarioTree) -> NodeProcess:
    """Explicit Euler along every root path.

    ``X_{k+1} = X_k + b dt_k + h d<B>_k + sigma dB_k`` with coefficients
    at ``(t_k, X_k)``.
    """
    x0 = np.asarray(x0, dtype=float)
    if coeffs.dim is not None and x0.shape != (coeffs.dim,):
        raise ValueError(f"x0 must have shape ({coeffs.dim},), got {x0.shape}")
    m = tree.branching
    t, dt = tree.grid.times, tree.grid.dt
    X = [x0.reshape(1, *x0.shape).copy()]
    for k in range(tree.steps):
        x = X[-1]
        b = _eval(coeffs.b, t[k], x, "b", k)
        h = _eval(coeffs.h, t[k], x, "h", k)
        s = _eval(coeffs.sigma, t[k], x, "sigma", k)
        dq, db = tree.dqv[k + 1], tree.dB[k + 1]
        if x.ndim == 2:
            dq, db = dq[:, None], db[:, None]
        X.append(
            np.repeat(x + b * dt[k], m, axis=0)
            + np.repeat(h, m, axis=0) * dq
            + np.repeat(s, m, axis=0) * db
        )
    return NodeProcess(tree, tuple(X))


@dataclass
class CheckEntry:
    coefficient: str
    kind: str
    ratio: float
    declared: float | None
    passed: bool


@dataclass
class AssumptionReport:
    entries: list
    samples: int
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def ratio(self, coefficient: str, kind: str = "lipschitz") -> float:
        for e in self.entries:
            if e.coefficient == coefficient and e.kind == kind:
                return e.ratio
        raise KeyError((coefficient, kind))

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    def raise_for_failures(self, label: str = "coefficients"):
        bad = self.failures()
        if bad:
            detail = ", ".join(
                f"{e.coefficient}/{e.kind}: ratio {e.ratio:.6g} > declared {e.declared}" for e in bad
            )
            raise AssumptionError(f"{label} failed the assumption audit ({detail})", report=self)


def sample_pairs(dim: int | None, budget: int, box: float, seed: int):
    """Pairs ``(x1, x2)`` in ``[-box, box]^n``: random, near-diagonal, and box corners."""
    rng = np.random.default_rng(seed)
    n = 1 if dim is None else dim
    q = budget // 3
    x1 = rng.uniform(-box, box, (budget, n))
    x2 = rng.uniform(-box, box, (budget, n))
    near = x1[q : 2 * q] + rng.normal(0, 1e-3 * box, (q, n))
    x2[q : 2 * q] = np.clip(near, -box, box)
    corners = rng.choice([-box, box], (budget - 2 * q, n))
    x1[2 * q :] = corners
    x2[2 * q :] = corners - np.sign(corners) * 1e-6 * box * rng.uniform(0.5, 1.0, corners.shape)
    same = np.all(x1 == x2, axis=1)
    x2[same] += 1e-9 * box
    if dim is None:
        return x1[:, 0], x2[:, 0]
    return x1, x2


def _norm(a):
    return np.abs(a) if a.ndim == 1 else np.linalg.norm(a, axis=-1)


def check_assumptions(
    coeffs: ForwardCoefficients,
    sample_budget: int = 3000,
    box: float = 10.0,
    horizon: float = 1.0,
    seed: int = 0,
) -> AssumptionReport:
    """Sampled audit of the declared Lipschitz / modulus / growth constants.

    Every coefficient gets an empirical Lipschitz ratio
    ``max |phi(t,x1) - phi(t,x2)| / |x1 - x2|`` (checked against
    ``lipschitz`` when declared). The modulus and growth modes, when
    declared, are checked jointly over all coefficients.
    """
    x1, x2 = sample_pairs(coeffs.dim, sample_budget, box, seed)
    ts = np.linspace(0.0, horizon, 5)
    dx = _norm(x1 - x2)
    entries = []
    diffs_sq = np.zeros((ts.size, dx.size))
    values_sq = np.zeros((ts.size, dx.size))
    for name, fn in coeffs.items():
        worst = 0.0
        for i, t in enumerate(ts):
            v1 = np.broadcast_to(np.asarray(fn(t, x1), dtype=float), x1.shape)
            v2 = np.broadcast_to(np.asarray(fn(t, x2), dtype=float), x2.shape)
            d = _norm(v1 - v2)
            diffs_sq[i] += d**2
            values_sq[i] += _norm(v1) ** 2
            worst = max(worst, float(np.max(d / dx)))
        declared = coeffs.lipschitz
        ok = declared is None or worst <= declared * (1 + 1e-9) + 1e-12
        entries.append(CheckEntry(name, "lipschitz", worst, declared, ok))

    if coeffs.modulus is not None and coeffs.alpha is not None:
        rho = coeffs.modulus
        ratio = 0.0
        for i, t in enumerate(ts):
            rhs = coeffs.alpha_sq(t) * np.asarray(rho(dx**2))
            ratio = max(ratio, float(np.max(diffs_sq[i] / rhs)))
        entries.append(CheckEntry("all", "modulus", ratio, 1.0, ratio <= 1 + 1e-9))
    if coeffs.growth is not None:
        a1, a2 = coeffs.growth
        x_sq = _norm(x1) ** 2
        ratio = max(float(np.max(values_sq[i] / (a1**2 + a2**2 * x_sq))) for i in range(ts.size))
        entries.append(CheckEntry("all", "growth", ratio, 1.0, ratio <= 1 + 1e-9))
    notes = []
    if coeffs.modulus is not None:
        notes.extend(f"modulus: {p}" for p in coeffs.modulus.audit())
        if notes:
            entries.append(CheckEntry("rho", "modulus-shape", float("nan"), None, False))
    return AssumptionReport(entries, int(sample_budget), notes)

"""Built-in perturbation families."""

from __future__ import annotations

import numpy as np

from ..gbsde import BackwardDrivers
from ..gfbsde import FbsdeData
from ..gsde import ForwardCoefficients
from ..sublinear import CylinderFunctional
from .experiments import PerturbationFamily


def halving(start: float, count: int) -> tuple:
    return tuple(start / 2**i for i in range(count))


SCHEDULE = halving(0.1, 8)


def additive_drift(params=SCHEDULE, base_drift: float = 0.5) -> PerturbationFamily:
    """``b^eps = b0 + eps`` with state-independent coefficients; gap at t is ``(eps t)^2``."""

    def gen(eps):
        return (
            ForwardCoefficients(
                b=lambda t, x: base_drift + eps,
                sigma=lambda t, x: 1.0,
                lipschitz=1.0,
                name=f"additive-drift({eps})",
            ),
            0.0,
        )

    return PerturbationFamily("sde", params, gen, name="additive-drift")


def lipschitz_drift(params=SCHEDULE) -> PerturbationFamily:
    """``b^eps(x) = x + eps``, ``sigma = 1``, ``x0 = 1``."""

    def gen(eps):
        return (
            ForwardCoefficients(b=lambda t, x: x + eps, sigma=lambda t, x: 1.0, lipschitz=1.0, name=f"x+{eps}"),
            1.0,
        )

    return PerturbationFamily("sde", params, gen, name="lipschitz-drift")


def sde_initial_shift(params=SCHEDULE) -> PerturbationFamily:
    def gen(eps):
        return (
            ForwardCoefficients(
                b=lambda t, x: np.sin(x),
                h=lambda t, x: 0.5 * np.cos(x),
                sigma=lambda t, x: 0.5 * x,
                lipschitz=1.0,
            ),
            1.0 + eps,
        )

    return PerturbationFamily("sde", params, gen, name="initial-shift", convergence="initial-value")


def bsde_terminal_shift(steps: int, params=SCHEDULE) -> PerturbationFamily:
    """``xi^delta = B_T^2 + delta`` with zero drivers; the L1 gap is ``delta`` at every t."""

    def gen(delta):
        xi = CylinderFunctional(
            (steps,), lambda x: x[..., 0] ** 2 + delta, name=f"bt_squared+{delta}"
        )
        return BackwardDrivers(lipschitz=1.0), xi

    return PerturbationFamily("bsde", params, gen, name="terminal-shift", convergence="terminal-L1")


def bsde_driver_shift(steps: int, params=SCHEDULE) -> PerturbationFamily:
    """``f^delta(y) = sin(y)/2 + delta``, ``g = 0``, ``xi = max(B_T, 0)``."""
    xi = CylinderFunctional((steps,), lambda x: np.maximum(x[..., 0], 0.0), growth_c=1.0, name="call0")

    def gen(delta):
        return BackwardDrivers(f=lambda t, y: 0.5 * np.sin(y) + delta, lipschitz=0.5), xi

    return PerturbationFamily("bsde", params, gen, name="driver-shift")


def fbsde_initial_shift(steps: int, params=SCHEDULE) -> PerturbationFamily:
    """Zero coefficients, ``x^gamma = 1 + gamma``: joint gap ``gamma^2`` from X alone."""
    xi = CylinderFunctional((steps,), lambda x: x[..., 0], growth_c=1.0, name="bt")

    def gen(gamma):
        return FbsdeData(x0=1.0 + gamma, xi=xi, K=0.1)

    return PerturbationFamily("fbsde", params, gen, name="initial-shift", convergence="initial-value")


def fbsde_driver_shift(steps: int, params=SCHEDULE, K: float = 0.1) -> PerturbationFamily:
    """Linear coupling ``b = K y``, ``f = K x + gamma``, ``xi = B_T^2``."""
    xi = CylinderFunctional((steps,), lambda x: x[..., 0] ** 2, name="bt_squared")

    def gen(gamma):
        return FbsdeData(
            x0=1.0,
            xi=xi,
            K=K,
            b=lambda t, x, y: K * y,
            f=lambda t, x, y: K * x + gamma,
        )

    return PerturbationFamily("fbsde", params, gen, name="driver-shift")


BUILTIN = {
    ("sde", "additive-drift"): lambda steps, params: additive_drift(params),
    ("sde", "lipschitz-drift"): lambda steps, params: lipschitz_drift(params),
    ("sde", "initial-shift"): lambda steps, params: sde_initial_shift(params),
    ("bsde", "terminal-shift"): lambda steps, params: bsde_terminal_shift(steps, params),
    ("bsde", "driver-shift"): lambda steps, params: bsde_driver_shift(steps, params),
    ("fbsde", "initial-shift"): lambda steps, params: fbsde_initial_shift(steps, params),
    ("fbsde", "driver-shift"): lambda steps, params: fbsde_driver_shift(steps, params),
}

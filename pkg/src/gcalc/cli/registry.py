"""Named coefficient and functional builders, so runs can be configured without code."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..sublinear import CylinderFunctional


def _floats(arg: str, n: int, name: str) -> list:
    try:
        vals = [float(v) for v in arg.split(",")]
    except ValueError:
        raise ConfigError(f"{name}: cannot parse numbers from {arg!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{name}: expected {n} comma-separated numbers, got {arg!r}")
    return vals


def coefficient(spec: str, eps: float = 0.0):
    """Resolve a coefficient name to ``(fn(t, x), lipschitz_constant)``.

    Names: ``zero``, ``constant:c``, ``linear:a,b`` (``a x + b``), ``sin``,
    ``additive-eps:base`` (``base + eps``, the perturbation knob).
    """
    head, _, arg = spec.partition(":")
    if head == "zero" and not arg:
        return (lambda t, x: 0.0), 0.0
    if head == "constant":
        (c,) = _floats(arg, 1, spec)
        return (lambda t, x: c), 0.0
    if head == "linear":
        a, b = _floats(arg, 2, spec)
        return (lambda t, x: a * x + b), abs(a)
    if head == "sin" and not arg:
        return (lambda t, x: np.sin(x)), 1.0
    if head == "additive-eps":
        (base,) = _floats(arg, 1, spec)
        return (lambda t, x: base + eps), 0.0
    raise ConfigError(f"unknown coefficient {spec!r}")


def functional(spec: str, steps: int) -> CylinderFunctional:
    """Terminal functionals of ``B_T``: ``bt``, ``bt_squared``, ``call:k``, ``zero``, ``constant:c``."""
    if steps < 1:
        raise ConfigError("steps must be >= 1 for a terminal functional")
    head, _, arg = spec.partition(":")
    idx = (steps,)
    if head == "bt" and not arg:
        return CylinderFunctional(idx, lambda x: x[..., 0], growth_c=1.0, name=spec)
    if head == "bt_squared" and not arg:
        return CylinderFunctional(idx, lambda x: x[..., 0] ** 2, growth_c=1.0, growth_pow=1, name=spec)
    if head == "call":
        (k,) = _floats(arg, 1, spec)
        return CylinderFunctional(idx, lambda x: np.maximum(x[..., 0] - k, 0.0), growth_c=1.0 + abs(k), name=spec)
    if head == "zero" and not arg:
        return CylinderFunctional(idx, lambda x: np.zeros(x.shape[:-1]), name=spec)
    if head == "constant":
        (c,) = _floats(arg, 1, spec)
        return CylinderFunctional(idx, lambda x: np.full(x.shape[:-1], c), growth_c=abs(c), name=spec)
    raise ConfigError(f"unknown functional {spec!r}")


def validate_coefficient(spec: str):
    coefficient(spec)


def validate_functional(spec: str):
    functional(spec, 1)

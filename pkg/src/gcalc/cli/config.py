"""Run configuration: flat ``key = value`` files with command-line overrides."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError
from . import registry

PROBLEMS = ("expect", "sde", "bsde", "fbsde", "stability", "verify")
BACKENDS = ("auto", "exact", "lattice", "oracle")
STABILITY_FAMILIES = {
    "sde": ("additive-drift", "lipschitz-drift", "initial-shift"),
    "bsde": ("terminal-shift", "driver-shift"),
    "fbsde": ("initial-shift", "driver-shift"),
}


@dataclass
class RunConfig:
    """Every setting a run can take. Unset optional fields fall back to the defaults here."""

    problem: str = "expect"
    band: tuple = (0.5, 1.0)
    horizon: float = 1.0
    steps: int = 6
    levels: tuple | None = None
    backend: str = "auto"
    # expect
    functional: str = "bt_squared"
    lower: bool = False
    # sde
    b: str = "zero"
    h: str = "zero"
    sigma: str = "constant:1"
    x0: float = 0.0
    eps: float = 0.0
    # bsde
    f: str = "zero"
    g: str = "zero"
    # fbsde
    k: float = 0.1
    scheme: str = "jacobi"
    force: bool = False
    # stability
    kind: str = "sde"
    family: str = "additive-drift"
    params: tuple | None = None
    times: tuple | None = None
    # tolerances
    step_tol: float = 1e-13
    tol: float = 1e-12
    max_iter: int = 200
    seed: int = 0
    # outputs
    out_csv: str | None = None
    out_json: str | None = None
    out_dir: str | None = None
    deterministic: bool = True

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TUPLES = {"band", "levels", "params", "times"}
_BOOLS = {"lower", "force", "deterministic"}
_INTS = {"steps", "max_iter", "seed"}
_FLOATS = {"horizon", "x0", "eps", "k", "step_tol", "tol"}


def _parse_bool(key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def coerce(key: str, raw):
    """Convert a raw string (or already-typed value) for field ``key``."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    if raw is None:
        return None
    if not isinstance(raw, str):
        if key in _TUPLES:
            return tuple(float(v) for v in raw)
        return raw
    try:
        if key in _TUPLES:
            parts = raw.replace(",", " ").split()
            return tuple(float(p) for p in parts)
        if key in _BOOLS:
            return _parse_bool(key, raw)
        if key in _INTS:
            return int(raw)
        if key in _FLOATS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw.strip()


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in out:
            raise ConfigError(f"config line {n}: duplicate key {key!r}")
        out[key] = coerce(key, value)
    return out


def build_config(file_values: dict | None, overrides: dict) -> RunConfig:
    """File values first, then non-None overrides (flags win)."""
    merged = {}
    for src in (file_values or {}, overrides):
        for key, value in src.items():
            if value is None:
                continue
            merged[key] = coerce(key, value)
    cfg = RunConfig(**merged)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Static validation only: ranges and registry lookups, no numerics."""
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"problem: expected one of {PROBLEMS}, got {cfg.problem!r}")
    if len(cfg.band) != 2:
        raise ConfigError("band: expected two numbers (sigma_low_sq sigma_high_sq)")
    lo, hi = cfg.band
    if not 0 <= lo <= hi:
        raise ConfigError(f"band: need 0 <= low <= high, got {lo} {hi}")
    if not cfg.horizon > 0:
        raise ConfigError("horizon: must be > 0")
    if cfg.steps < 1:
        raise ConfigError("steps: must be >= 1")
    if cfg.levels is not None and any(not lo <= v <= hi for v in cfg.levels):
        raise ConfigError("levels: every level must lie in the band")
    if cfg.backend not in BACKENDS:
        raise ConfigError(f"backend: expected one of {BACKENDS}, got {cfg.backend!r}")
    if cfg.scheme not in ("jacobi", "gauss-seidel"):
        raise ConfigError(f"scheme: unknown {cfg.scheme!r}")
    if cfg.k < 0:
        raise ConfigError("k: must be >= 0")
    if cfg.max_iter < 1:
        raise ConfigError("max_iter: must be >= 1")
    if not (cfg.tol > 0 and cfg.step_tol > 0):
        raise ConfigError("tol, step_tol: must be > 0")
    if cfg.problem in ("expect", "bsde", "fbsde"):
        _resolve("functional", registry.validate_functional, cfg.functional)
    if cfg.problem == "sde":
        for key in ("b", "h", "sigma"):
            _resolve(key, registry.validate_coefficient, getattr(cfg, key))
    if cfg.problem == "bsde":
        for key in ("f", "g"):
            _resolve(key, registry.validate_coefficient, getattr(cfg, key))
    if cfg.problem == "stability":
        if cfg.kind not in STABILITY_FAMILIES:
            raise ConfigError(f"kind: expected one of {tuple(STABILITY_FAMILIES)}, got {cfg.kind!r}")
        if cfg.family not in STABILITY_FAMILIES[cfg.kind]:
            raise ConfigError(
                f"family: {cfg.kind} families are {STABILITY_FAMILIES[cfg.kind]}, got {cfg.family!r}"
            )
        if cfg.params is not None:
            if any(p < 0 for p in cfg.params) or any(b > a for a, b in zip(cfg.params, cfg.params[1:])):
                raise ConfigError("params: must be nonnegative and nonincreasing")
    if cfg.times is not None and any(not 0 <= t <= cfg.horizon for t in cfg.times):
        raise ConfigError("times: must lie in [0, horizon]")


def _resolve(key, check, value):
    try:
        check(value)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None

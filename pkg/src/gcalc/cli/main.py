"""``gcalc`` command-line interface.

Exit codes: 0 success, 1 validation error, 2 verdict failure, 3 numerical
budget error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import (
    AssumptionError,
    BlowUpError,
    BudgetExceededError,
    ConfigError,
    ContractionError,
    ConvergenceError,
    GCalcError,
    NonFiniteError,
)
from ..gbsde import BackwardDrivers, solve_backward
from ..gfbsde import FbsdeData, solve_fbsde
from ..gsde import ForwardCoefficients, check_assumptions, solve_forward
from ..stability import run_experiment
from ..stability.families import BUILTIN, SCHEDULE
from ..stability.report import dumps
from ..sublinear import (
    Lattice,
    TimeGrid,
    VolatilityBand,
    brute_force_expect,
    build_tree,
    expect,
    expect_slice,
    lower_expect,
    tree_size,
)
from ..sublinear.model import DEFAULT_NODE_BUDGET
from . import registry
from .config import BACKENDS, PROBLEMS, RunConfig, build_config, read_config_file
from .verify import run_verify

EXIT_OK, EXIT_INVALID, EXIT_VERDICT, EXIT_BUDGET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--band", nargs=2, type=float, metavar=("LOW", "HIGH"), help="variance band")
    p.add_argument("--horizon", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--levels", nargs="+", type=float, help="variance levels inside the band")
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--deterministic", dest="deterministic", action="store_true", default=None)
    p.add_argument("--no-deterministic", dest="deterministic", action="store_false")


def _expect_opts(p):
    p.add_argument("--functional")
    p.add_argument("--lower", action="store_true", default=None)


def _sde_opts(p):
    for name in ("b", "h", "sigma"):
        p.add_argument(f"--{name}")
    p.add_argument("--x0", type=float)
    p.add_argument("--eps", type=float, help="value substituted into additive-eps coefficients")


def _bsde_opts(p):
    p.add_argument("--f")
    p.add_argument("--g")
    p.add_argument("--step-tol", dest="step_tol", type=float)


def _fbsde_opts(p):
    p.add_argument("--k", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--scheme", choices=("jacobi", "gauss-seidel"))
    p.add_argument("--force", action="store_true", default=None)


def _stability_opts(p):
    p.add_argument("--kind", choices=("sde", "bsde", "fbsde"))
    p.add_argument("--family")
    p.add_argument("--params", nargs="+", type=float)
    p.add_argument("--times", nargs="+", type=float)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcalc", description="G-expectation calculus on scenario trees", allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    kw = {"allow_abbrev": False}

    p = sub.add_parser("expect", help="upper (or lower) G-expectation of a terminal functional", **kw)
    _common(p)
    _expect_opts(p)

    p = sub.add_parser("sde", help="forward G-SDE, prints E[X_T] and -E[-X_T]", **kw)
    _common(p)
    _sde_opts(p)

    p = sub.add_parser("bsde", help="backward G-BSDE, prints Y_0", **kw)
    _common(p)
    p.add_argument("--functional", help="terminal value")
    _bsde_opts(p)

    p = sub.add_parser("fbsde", help="coupled system with b = K y, f = K x, solved by Picard iteration", **kw)
    _common(p)
    p.add_argument("--functional", help="terminal value")
    p.add_argument("--x0", type=float)
    _fbsde_opts(p)

    p = sub.add_parser("stability", help="perturbation experiment for a built-in family", **kw)
    _common(p)
    _stability_opts(p)

    p = sub.add_parser("verify", help="run the property suite", **kw)
    _common(p)

    p = sub.add_parser("check", help="validate a configuration without running numerics", **kw)
    _common(p)
    p.add_argument("--problem", choices=PROBLEMS)
    for add in (_expect_opts, _sde_opts, _bsde_opts, _fbsde_opts, _stability_opts):
        add(p)
    return parser


def _config(args) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.command != "check":
        values["problem"] = args.command
    file_values = read_config_file(args.config) if args.config else {}
    if args.command != "check" and "problem" in file_values and file_values["problem"] != args.command:
        raise ConfigError(
            f"problem: config file says {file_values['problem']!r} but the subcommand is {args.command!r}"
        )
    return build_config(file_values, values)


def _band(cfg: RunConfig) -> VolatilityBand:
    return VolatilityBand(*cfg.band)


def _grid(cfg: RunConfig) -> TimeGrid:
    return TimeGrid.uniform(cfg.horizon, cfg.steps)


def _tree(cfg: RunConfig):
    return build_tree(_grid(cfg), _band(cfg), cfg.levels)


def _write(path, text: str):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _emit(cfg: RunConfig, payload: dict, csv_text: str | None = None):
    payload = {"schema": "gcalc-report/1", "config": cfg.to_dict(), **payload}
    _write(cfg.out_json, dumps(payload))
    if csv_text is not None:
        _write(cfg.out_csv, csv_text)


def _fmt(x: float) -> str:
    """Summary-line format: 12 significant digits, so lattice round-off does not show."""
    return repr(float(f"{float(x):.12g}"))


def cmd_expect(cfg: RunConfig) -> int:
    X = registry.functional(cfg.functional, cfg.steps)
    backend = cfg.backend
    if backend == "auto":
        n_levels = len(cfg.levels) if cfg.levels else 2
        backend = "exact" if tree_size(cfg.steps, n_levels) <= DEFAULT_NODE_BUDGET else "lattice"
    if backend == "lattice":
        model = Lattice(_grid(cfg), _band(cfg), cfg.levels)
    else:
        model = _tree(cfg)
    if backend == "oracle":
        value = -brute_force_expect(-X.leaf_values(model), model) if cfg.lower else brute_force_expect(X, model)
    else:
        value = lower_expect(X, model) if cfg.lower else expect(X, model)
    _emit(cfg, {"result": {"value": value, "backend": backend}})
    print(_fmt(value))
    return EXIT_OK


def _forward(cfg: RunConfig) -> ForwardCoefficients:
    fns, lips = {}, []
    for name in ("b", "h", "sigma"):
        fns[name], lip = registry.coefficient(getattr(cfg, name), cfg.eps)
        lips.append(lip)
    return ForwardCoefficients(**fns, lipschitz=max(max(lips), 1e-12), name="cli")


def cmd_sde(cfg: RunConfig) -> int:
    coeffs = _forward(cfg)
    check_assumptions(coeffs, horizon=cfg.horizon).raise_for_failures("sde coefficients")
    tree = _tree(cfg)
    X = solve_forward(coeffs, cfg.x0, tree)
    n = tree.steps
    up = expect_slice(X.terminal, tree, n)
    lo = -expect_slice(-X.terminal, tree, n)
    _emit(cfg, {"result": {"upper_mean": up, "lower_mean": lo}})
    print(f"E[X_T] = {_fmt(up)}  -E[-X_T] = {_fmt(lo)}")
    return EXIT_OK


def _drivers(cfg: RunConfig) -> BackwardDrivers:
    f, lf = registry.coefficient(cfg.f)
    g, lg = registry.coefficient(cfg.g)
    return BackwardDrivers(f=f, g=g, lipschitz=max(lf, lg), name="cli")


def cmd_bsde(cfg: RunConfig) -> int:
    Y = solve_backward(_drivers(cfg), registry.functional(cfg.functional, cfg.steps), _tree(cfg), step_tol=cfg.step_tol)
    y0 = float(Y.at(0)[0])
    _emit(cfg, {"result": {"Y0": y0}})
    print(_fmt(y0))
    return EXIT_OK


def cmd_fbsde(cfg: RunConfig) -> int:
    K = cfg.k
    data = FbsdeData(
        x0=cfg.x0,
        xi=registry.functional(cfg.functional, cfg.steps),
        K=K,
        b=lambda t, x, y: K * y,
        f=lambda t, x, y: K * x,
    )
    res = solve_fbsde(data, _tree(cfg), tol=cfg.tol, max_iter=cfg.max_iter, force=cfg.force, scheme=cfg.scheme)
    y0 = float(res.pair.Y.at(0)[0])
    _emit(
        cfg,
        {
            "result": {
                "Y0": y0,
                "iterations": res.iterations,
                "factor": res.factor,
                "residuals": res.residual_history,
                "forced": res.forced,
            }
        },
    )
    print(f"Y_0 = {_fmt(y0)}  iterations = {res.iterations}  factor = {res.factor:.4f}")
    return EXIT_OK


def cmd_stability(cfg: RunConfig) -> int:
    params = cfg.params if cfg.params is not None else SCHEDULE
    fam = BUILTIN[(cfg.kind, cfg.family)](cfg.steps, params)
    report = run_experiment(fam, _tree(cfg), cfg.times)
    _write(cfg.out_csv, report.to_csv())
    _write(cfg.out_json, report.to_json(cfg.to_dict()))
    if cfg.out_csv is None and cfg.out_json is None:
        sys.stdout.write(report.to_csv())
    status = "ok" if report.passed else "FAILED"
    print(f"{cfg.kind}/{cfg.family}: {status} ({', '.join(f'{k}={v}' for k, v in sorted(report.verdicts.items()))})")
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_verify(cfg: RunConfig) -> int:
    result = run_verify(_band(cfg), cfg.horizon, cfg.steps, cfg.seed)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: worst={c.worst!r} tol={c.tolerance!r}")
    for name, rep in result.reports.items():
        print(f"{'PASS' if rep.passed else 'FAIL'} stability {name}")
    summary = {
        "passed": result.passed,
        "checks": [c.to_dict() for c in result.checks],
        "reports": {k: r.to_dict() for k, r in result.reports.items()},
    }
    _emit(cfg, {"result": summary})
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        _write(out / "verify.json", dumps({"schema": "gcalc-report/1", "config": cfg.to_dict(), "result": summary}))
        for name, rep in result.reports.items():
            _write(out / f"{name}.csv", rep.to_csv())
            _write(out / f"{name}.json", rep.to_json(cfg.to_dict()))
    print("verify: " + ("all checks passed" if result.passed else "FAILED"))
    return EXIT_OK if result.passed else EXIT_VERDICT


def cmd_check(cfg: RunConfig) -> int:
    print(f"config ok: problem={cfg.problem}")
    return EXIT_OK


COMMANDS = {
    "expect": cmd_expect,
    "sde": cmd_sde,
    "bsde": cmd_bsde,
    "fbsde": cmd_fbsde,
    "stability": cmd_stability,
    "verify": cmd_verify,
    "check": cmd_check,
}


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand and map failures to exit codes."""
    try:
        args = make_parser().parse_args(argv)
        cfg = _config(args)
        return COMMANDS[args.command](cfg)
    except (BudgetExceededError, ConvergenceError, BlowUpError, NonFiniteError) as exc:
        print(f"gcalc: numerical budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ContractionError, AssumptionError, GCalcError, ValueError) as exc:
        print(f"gcalc: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

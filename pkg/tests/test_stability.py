import csv
import io
import json

import numpy as np
import pytest

from gcalc.errors import AssumptionError, ContractionError
from gcalc.gfbsde import FbsdeData
from gcalc.gsde import ForwardCoefficients
from gcalc.stability import PerturbationFamily, run_experiment
from gcalc.stability.families import (
    BUILTIN,
    SCHEDULE,
    additive_drift,
    bsde_driver_shift,
    bsde_terminal_shift,
    fbsde_driver_shift,
    fbsde_initial_shift,
    halving,
    lipschitz_drift,
    sde_initial_shift,
)
from gcalc.stability.report import CSV_COLUMNS, SCHEMA
from gcalc.sublinear import CylinderFunctional, TimeGrid, VolatilityBand, build_tree
from oracles import AffineFbsdeOracle, driver_shift_envelope, lipschitz_drift_gap

BAND = VolatilityBand(0.5, 1.0)
SHORT = (0.1, 0.05, 0.025)


@pytest.fixture(scope="module")
def tree6():
    return build_tree(TimeGrid.uniform(1.0, 6), BAND)


@pytest.fixture(scope="module")
def tree8():
    return build_tree(TimeGrid.uniform(1.0, 8), BAND)


def test_additive_drift_gap_is_exact(tree6):
    rep = run_experiment(additive_drift(SHORT), tree6, times=[0.5, 1.0])
    for r in rep.rows:
        assert r.gap == pytest.approx((r.param * r.t) ** 2, abs=1e-12)
        assert r.verdict == "ok"


def test_lipschitz_drift_matches_linear_recursion(tree6):
    rep = run_experiment(lipschitz_drift(SHORT), tree6)
    for eps, gap in zip(SHORT, rep.gaps(1.0)):
        assert gap == pytest.approx(lipschitz_drift_gap(eps, 6), rel=1e-12)
    assert rep.constants["C"] == 7.0 and rep.constants["mode"] == "lipschitz"


def test_zero_parameter_gives_zero_gap(tree6):
    for fam in (additive_drift((0.1, 0.0)), bsde_terminal_shift(6, (0.1, 0.0)), fbsde_initial_shift(6, (0.1, 0.0))):
        rep = run_experiment(fam, tree6, times=[0.0, 1.0])
        assert rep.verdicts["zero_at_zero"]
        assert all(r.gap == 0.0 for r in rep.rows if r.param == 0.0)


def test_terminal_shift_is_exact(tree6):
    rep = run_experiment(bsde_terminal_shift(6, SHORT), tree6, times=[0.0, 0.5, 1.0])
    for r in rep.rows:
        assert r.gap == pytest.approx(r.param, abs=1e-12)
        assert r.verdict == "ok"


@pytest.mark.parametrize("k", [0, 3])
def test_driver_shift_within_recursion_envelope(tree6, k):
    rep = run_experiment(bsde_driver_shift(6, SHORT), tree6, times=[k / 6])
    for delta, gap in zip(SHORT, rep.gaps()):
        lo, hi = driver_shift_envelope(delta, 0.5, 6, k)
        assert lo - 1e-13 <= gap <= hi + 1e-13
        # first order in the remaining time
        assert gap == pytest.approx(delta * (1 - k / 6), rel=0.35)


def test_fbsde_initial_shift_gap_is_square(tree6):
    rep = run_experiment(fbsde_initial_shift(6, SHORT), tree6, times=[0.0, 0.5, 1.0])
    for r in rep.rows:
        assert r.gap == pytest.approx(r.param**2, abs=1e-12)
        assert r.bound is None and r.verdict == "no-bound"


def test_fbsde_driver_shift_against_linear_system():
    t = build_tree(TimeGrid.uniform(1.0, 4), BAND)
    rep = run_experiment(fbsde_driver_shift(4, SHORT), t, times=[0.0])
    base = AffineFbsdeOracle(4, t.levels, 1.0, lambda b: b**2, b=(0, 0.1, 0), f=(0.1, 0, 0)).solve()
    for gamma, gap in zip(SHORT, rep.gaps()):
        X, Y = AffineFbsdeOracle(4, t.levels, 1.0, lambda b: b**2, b=(0, 0.1, 0), f=(0.1, 0, gamma)).solve()
        assert gap == pytest.approx((X[0][0] - base[0][0][0]) ** 2 + (Y[0][0] - base[1][0][0]) ** 2, abs=1e-10)
    g = rep.gaps()
    assert all(b < a for a, b in zip(g, g[1:]))


@pytest.mark.parametrize("key", sorted(BUILTIN))
def test_registered_families_converge(tree6, key):
    fam = BUILTIN[key](6, SCHEDULE)
    rep = run_experiment(fam, tree6, times=[0.0, 0.5, 1.0])
    assert rep.verdicts["nonincreasing"]
    assert rep.verdicts["final_over_first"] < 1e-2
    assert rep.passed
    if "within_bound" in rep.verdicts:
        assert rep.verdicts["within_bound"]


def test_sde_gronwall_holds_for_initial_shift(tree8):
    rep = run_experiment(sde_initial_shift(SHORT), tree8, times=[0.25, 0.5, 1.0])
    assert all(r.verdict == "ok" for r in rep.rows)


def test_rows_sorted_and_gaps_nonnegative(tree6):
    rep = run_experiment(bsde_driver_shift(6, halving(0.1, 4)), tree6, times=[1.0, 0.0])
    params = [r.param for r in rep.rows]
    assert params == sorted(params, reverse=True)
    assert all(r.gap >= 0 for r in rep.rows)


def test_schedule_validation():
    with pytest.raises(ValueError):
        PerturbationFamily("sde", (0.05, 0.1), lambda e: None)
    with pytest.raises(ValueError):
        PerturbationFamily("ode", (0.1,), lambda e: None)


def test_audit_failure_is_raised(tree6):
    fam = PerturbationFamily(
        "sde", (0.1,), lambda e: (ForwardCoefficients(b=lambda t, x: x**2 + e, lipschitz=1.0), 0.0)
    )
    with pytest.raises(AssumptionError):
        run_experiment(fam, tree6)


def test_inadmissible_fbsde_family(tree6):
    xi = CylinderFunctional((6,), lambda x: x[..., 0])
    fam = PerturbationFamily("fbsde", (0.1,), lambda g: FbsdeData(x0=g, xi=xi, K=1.0))
    with pytest.raises(ContractionError):
        run_experiment(fam, tree6)


def test_csv_and_json(tree6):
    rep = run_experiment(additive_drift(SHORT), tree6, times=[1.0])
    text = rep.to_csv()
    assert "\r" not in text and text.endswith("\n")
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + len(SHORT)
    payload = json.loads(rep.to_json({"steps": 6}))
    assert payload["schema"] == SCHEMA
    assert payload["config"] == {"steps": 6}
    assert len(payload["rows"]) == len(SHORT)
    fb = run_experiment(fbsde_initial_shift(6, SHORT), tree6)
    assert list(csv.reader(io.StringIO(fb.to_csv())))[1][3] == ""
    assert json.loads(fb.to_json())["rows"][0]["bound"] is None


def test_thread_count_does_not_change_reports(tree6, monkeypatch):
    out = []
    for n in ("1", "4"):
        monkeypatch.setenv("GCALC_THREADS", n)
        reps = [run_experiment(f, tree6, times=[0.0, 1.0]) for f in (lipschitz_drift(), bsde_driver_shift(6), fbsde_driver_shift(6))]
        out.append("".join(r.to_csv() + r.to_json() for r in reps))
    assert out[0] == out[1]

"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The full verification suite is run twice (in-process, then through the
CLI) into temporary directories; criteria 1-7 read the first run's
reports, criterion 9 compares every CSV byte for byte.  Run alone with

    pytest -s tests/test_acceptance.py
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from nschemo.cli import EXIT_OK, main
from nschemo.experiments import run_all
from nschemo.grid import Grid, MacVelocity, ScalarField, advect_conservative, inner_product, laplacian_neumann
from nschemo.runner import run
from nschemo.stepper import PhysParams, SourceSpec, StepperConfig, make_state

RESULTS: list[str] = []

pytestmark = pytest.mark.acceptance


def record(number, title, ok, detail):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify_a")
    reports = {r.name: r for r in run_all(out)}
    return out, reports


def _checks(rep, prefix=""):
    return {c.name: c for c in rep.checks if c.name.startswith(prefix)}


def _all_pass(checks, expect):
    """Every check passes and uses the stated threshold and relation."""
    bad = []
    for name, (rel, thr) in expect.items():
        c = checks[name]
        if c.relation != rel or c.threshold != thr or not c.passed:
            bad.append(f"{name}={c.measured!r}")
    return bad


def test_criterion_1_mass_law(first_run):
    rep = first_run[1]["mass_law"]
    c = _checks(rep)
    expect = {}
    for a in ("0.0", "0.5", "2.0"):
        expect[f"recurrence_alpha_{a}"] = ("<=", 1e-10)
        expect[f"closed_form_alpha_{a}"] = ("<=", 1e-10)
    expect["conservation_alpha_0"] = ("<=", 1e-12)
    for a in ("0.5", "2.0"):
        expect[f"exp_law_order_alpha_{a}"] = (">=", 0.9)
    bad = _all_pass(c, expect)
    fast = rep.elapsed <= 60.0
    worst = max(c[f"recurrence_alpha_{a}"].measured for a in ("0.0", "0.5", "2.0"))
    order = min(c[f"exp_law_order_alpha_{a}"].measured for a in ("0.5", "2.0"))
    ok = record(
        1, "discrete mass law", not bad and fast,
        f"recurrence {worst:.2e} <= 1e-10, conservation {c['conservation_alpha_0'].measured:.2e} <= 1e-12, "
        f"order {order:.3f} >= 0.9, runtime {rep.elapsed:.1f}s <= 60s" + (f"; failing {bad}" if bad else ""),
    )
    assert ok


def test_criterion_2_nutrient_mean(first_run):
    rep = first_run[1]["mass_law"]
    c = _checks(rep, "nutrient_mean_")
    bad = _all_pass(c, {k: ("<=", 1e-12) for k in c})
    worst = max(x.measured for x in c.values())
    ok = record(2, "nutrient mean law", len(c) == 3 and not bad, f"max per-step relative error {worst:.2e} <= 1e-12")
    assert ok


def test_criterion_3_energy_law(first_run):
    rep = first_run[1]["energy_dissipation"]
    c = _checks(rep)
    bad = _all_pass(
        c,
        {
            "max_relative_energy_increase": ("<=", 1e-8),
            "min_dissipation": (">=", 0.0),
            "residual_order": (">=", 0.9),
        },
    )
    fast = rep.elapsed <= 600.0
    ok = record(
        3, "energy law", not bad and fast,
        f"max increase/(1+|E|) {c['max_relative_energy_increase'].measured:.2e} <= 1e-8, "
        f"min D {c['min_dissipation'].measured:.2e} >= 0, residual order {c['residual_order'].measured:.3f} >= 0.9, "
        f"runtime {rep.elapsed:.1f}s <= 600s",
    )
    assert ok


def test_criterion_4_separation(first_run):
    rep = first_run[1]["separation"]
    c = _checks(rep)
    expect = {}
    for run_name in ("spinodal", "stripe"):
        expect[f"min_margin_{run_name}"] = (">", 0.0)
        expect[f"tail_min_margin_{run_name}"] = (">", 0.0)
        expect[f"clamp_events_{run_name}"] = ("==", 0.0)
    bad = _all_pass(c, expect)
    ok = record(
        4, "strict separation", not bad,
        f"min margin spinodal {c['min_margin_spinodal'].measured:.4f}, stripe {c['min_margin_stripe'].measured:.4f}; "
        f"clamp events {int(c['clamp_events_spinodal'].measured + c['clamp_events_stripe'].measured)}",
    )
    assert ok


def test_criterion_5_continuous_dependence(first_run):
    rep = first_run[1]["continuous_dependence"]
    c = _checks(rep)
    bad = _all_pass(c, {"ratio_finite": ("==", 1.0), "ratio_spread": ("<", 10.0)})
    ok = record(5, "continuous dependence", not bad, f"G spread {c['ratio_spread'].measured:.4f} < 10, finite")
    assert ok


def test_criterion_6_elliptic(first_run):
    rep = first_run[1]["elliptic"]
    c = _checks(rep)
    bad = _all_pass(
        c,
        {
            "constant_state_error": ("<=", 1e-9),
            "space_order": (">=", 1.8),
            "multi_start_spread": ("<=", 10.0 * 1e-10),
            "min_margin": (">", 0.0),
        },
    )
    ok = record(
        6, "singular elliptic solver", not bad and rep.passed,
        f"constant error {c['constant_state_error'].measured:.1e}, order {c['space_order'].measured:.3f}, "
        f"10-start spread {c['multi_start_spread'].measured:.1e}, min margin {c['min_margin'].measured:.2e}",
    )
    assert ok


def test_criterion_7_scheme_consistency(first_run):
    rep = first_run[1]["manufactured_convergence"]
    c = _checks(rep)
    bad = _all_pass(c, {"space_order": (">=", 1.8), "time_order": (">=", 0.9)})
    ok = record(
        7, "manufactured convergence", not bad,
        f"space order {c['space_order'].measured:.3f} >= 1.8, time order {c['time_order'].measured:.3f} >= 0.9",
    )
    assert ok


def test_criterion_8_operator_identities():
    rng = np.random.default_rng(2024)
    worst_sum, worst_adj = 0.0, 0.0
    for nx, ny, lx, ly in ((64, 64, 1.0, 1.0), (37, 23, 2.0, 0.7), (16, 48, 1.0, 3.0)):
        g = Grid(nx, ny, lx, ly)
        for _ in range(5):
            f = ScalarField(g, rng.standard_normal(g.shape))
            h = ScalarField(g, rng.standard_normal(g.shape))
            u = rng.standard_normal((nx + 1, ny))
            w = rng.standard_normal((nx, ny + 1))
            u[0] = u[-1] = 0.0
            w[:, 0] = w[:, -1] = 0.0
            v = MacVelocity(g, u, w)
            outs = [laplacian_neumann(f).values] + [advect_conservative(v, f, up).values for up in (False, True)]
            for o in outs:
                worst_sum = max(worst_sum, abs(np.sum(o)) / np.sum(np.abs(o)))
            a = inner_product(laplacian_neumann(f), h)
            b = inner_product(f, laplacian_neumann(h))
            worst_adj = max(worst_adj, abs(a - b) / max(abs(a), abs(b)))

    g = Grid(64, 64)
    prm = PhysParams(
        B=1e-3, chi=0.5, alpha=0.2, c0=0.05, eta1=1.0, eta2=4.0,
        source=SourceSpec("gaussian", amplitude=0.5, width=0.1, decay=1.0),
    )
    cfg = StepperConfig(dt=2e-3)
    vel = MacVelocity.from_streamfunction(g, lambda x, y: 0.05 * np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2)
    st = make_state(g, rng.uniform(-0.05, 0.05, g.shape), 0.1, vel, prm)
    _, recs = run(st, prm, cfg, n_steps=60)
    div_max = max(r.div_max for r in recs[1:])
    ok = record(
        8, "operator identities", worst_sum <= 1e-13 and worst_adj <= 1e-12 and div_max <= cfg.projection_tol,
        f"telescoping {worst_sum:.1e} <= 1e-13, self-adjointness {worst_adj:.1e} <= 1e-12, "
        f"max |div v| over 60 steps {div_max:.1e} <= {cfg.projection_tol:.0e}",
    )
    assert ok


def _csv_bytes(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_criterion_9_determinism(first_run, tmp_path):
    out_a = first_run[0]
    out_b = tmp_path / "verify_b"
    code = main(["verify", "all", "--out", str(out_b)])
    a, b = _csv_bytes(out_a), _csv_bytes(out_b)
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = record(
        9, "determinism", code == EXIT_OK and not differing and len(a) > 0,
        f"`verify all` exit {code}, {len(a)} CSV files compared, {len(differing)} differ",
    )
    assert ok, differing


if __name__ == "__main__":
    raise SystemExit(pytest.main(["-s", "-v", __file__]))

"""Command line entry point: run, verify, elliptic-solve, convergence.

Exit codes: 0 success, 2 configuration or usage error, 3 solver abort,
4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import DEFAULT_OUT, OUT_ENV, ConfigError, build_initial_state, emit_config, parse_and_validate, parse_string
from .diagnostics import append_csv_row
from .elliptic import EllipticProblem, EllipticSolveError, solve_singular_neumann
from .fieldio import SnapshotError, emit_snapshot, read_snapshot, write_snapshot
from .grid import ScalarField, restrict
from .potential import Potential
from .runner import run
from .stepper import SolverAbort, make_state

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("nschemo")


def _out_dir(arg) -> Path:
    return Path(arg or os.environ.get(OUT_ENV, DEFAULT_OUT))


def _load(args):
    rc = parse_and_validate(args.config)
    if args.seed is not None:
        rc = rc.with_seed(args.seed)
    for w in rc.warnings:
        log.warning("%s", w)
    return rc


def cmd_run(args) -> int:
    rc = _load(args)
    out = _out_dir(args.out) if args.out else rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.effective.ini").write_text(emit_config(rc))
    diag = out / rc.values["output"]["diagnostics"]
    if diag.exists():
        diag.unlink()
    cadence = rc.values["output"]["cadence"]
    formats = rc.values["output"]["formats"]
    snap_dir = out / "snapshots"

    def write_row(state, rec):
        append_csv_row(diag, rec)

    def snapshot(state, rec):
        if cadence and state.step_index % cadence == 0:
            emit_snapshot(state, snap_dir, formats)

    state0 = build_initial_state(rc)
    try:
        final, recs = run(
            state0, rc.params, rc.stepper, t_end=rc.t_end, n_steps=rc.n_steps, hooks=[write_row, snapshot]
        )
    except SolverAbort as exc:
        dump = dict(exc.dump)
        dump["message"] = str(exc)
        (out / "abort.txt").write_text(json.dumps(dump, indent=2, sort_keys=True, default=repr) + "\n")
        if exc.state is not None:
            emit_snapshot(exc.state, out / "abort_state", ("binary",))
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    emit_snapshot(final, snap_dir, formats, tag="final")
    last = recs[-1]
    print(f"steps {len(recs) - 1}  t {final.t!r}  E {last.E!r}  margin {last.margin!r}  phi_mean {last.phi_mean!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .experiments import REGISTRY, run_all

    names = list(REGISTRY) if args.name == "all" else [args.name]
    for n in names:
        if n not in REGISTRY:
            print(f"unknown experiment {n!r}; known: all, {', '.join(REGISTRY)}", file=sys.stderr)
            return EXIT_CONFIG
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        reports = run_all(out, args.seed, names)
    except (SolverAbort, EllipticSolveError) as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    ok = True
    for rep in reports:
        for c in rep.checks:
            print(f"[{rep.name}] {c.line()}")
        ok = ok and rep.passed
    print("verify: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_elliptic(args) -> int:
    try:
        f, _ = read_snapshot(args.f)
    except (OSError, SnapshotError) as exc:
        print(f"cannot read data snapshot: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    A, B, theta, theta0 = args.A, args.B, args.theta, args.theta0
    kind = args.kind
    if args.config:
        rc = _load(args)
        A, B = rc.params.A, rc.params.B
        pot = rc.params.potential
    else:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                pot = Potential.quartic() if kind == "quartic" else Potential(kind, theta, theta0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        prob = EllipticProblem(A, B, pot, f, args.tol, args.max_newton)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        sol = solve_singular_neumann(prob)
    except EllipticSolveError as exc:
        (out / "elliptic_report.txt").write_text(
            json.dumps({"converged": False, "message": str(exc), "residual_history": exc.history}, indent=2) + "\n"
        )
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_snapshot(out / "u.snap", ScalarField(sol.u.grid, sol.u.values, "u"), 0.0, binary=True)
    report = {
        "converged": True,
        "newton_iters": sol.newton_iters,
        "final_residual": sol.final_residual,
        "margin": sol.margin,
        "linear_iters": sol.linear_iters,
        "residual_history": sol.residual_history,
    }
    (out / "elliptic_report.txt").write_text(json.dumps(report, indent=2) + "\n")
    print(f"newton_iters {sol.newton_iters}  residual {sol.final_residual!r}  margin {sol.margin!r}")
    return EXIT_OK


def _prolong(values, factor):
    return np.kron(values, np.ones((factor, factor)))


def cmd_convergence(args) -> int:
    rc = _load(args)
    if args.levels < 2:
        raise ConfigError("--levels must be >= 2")
    ini = rc.values["initial"]
    resample = ini["phi"] in ("stripe", "constant") and not ini["sigma_noise"] and not ini["sigma_file"]
    base = build_initial_state(rc)
    t_end = rc.t_end if rc.t_end is not None else rc.n_steps * rc.stepper.dt
    finals, rows = [], []
    for lev in range(args.levels):
        k = 2**lev
        ov = {
            ("grid", "nx"): rc.grid.nx * k,
            ("grid", "ny"): rc.grid.ny * k,
            ("stepper", "dt"): rc.stepper.dt / k**2,
            ("stepper", "t_end"): t_end,
        }
        if not resample:
            ov.update({("initial", "phi"): "constant", ("initial", "mean"): 0.0, ("initial", "sigma_file"): ""})
        lrc = parse_string(emit_config(rc, ov), f"{rc.source_path} (level {lev})")
        if resample:
            st = build_initial_state(lrc)
        else:
            st = make_state(
                lrc.grid, _prolong(base.phi.values, k), _prolong(base.sigma.values, k), None, lrc.params
            )
        try:
            final, recs = run(st, lrc.params, lrc.stepper, t_end=t_end)
        except SolverAbort as exc:
            print(f"solver abort at level {lev}: {exc}", file=sys.stderr)
            return EXIT_ABORT
        finals.append(final)
        rows.append([lev, lrc.grid.nx, lrc.grid.ny, lrc.stepper.dt, len(recs) - 1])
    diffs = []
    for lev in range(args.levels - 1):
        c, f = finals[lev], finals[lev + 1]
        d = restrict(f.phi.values) - c.phi.values
        diffs.append(math.sqrt(float(np.sum(d * d)) * c.grid.cell_area))
    lines = ["level,nx,ny,dt,steps,phi_diff_to_next,order"]
    for lev, row in enumerate(rows):
        diff = diffs[lev] if lev < len(diffs) else math.nan
        order = math.log2(diffs[lev - 1] / diffs[lev]) if 0 < lev < len(diffs) and diffs[lev] > 0 else math.nan
        lines.append(",".join(str(x) for x in row) + f",{diff!r},{order!r}")
    text = "\n".join(lines) + "\n"
    out = _out_dir(args.out) if args.out else rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.csv").write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nschemo",
        description="Navier-Stokes-Cahn-Hilliard-nutrient simulator with structure-preserving diagnostics.",
    )
    p.add_argument("--seed", type=int, default=None, help="override the configured RNG seed")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="{run,verify,elliptic-solve,convergence}")
    sub.required = True

    r = sub.add_parser("run", help="run a simulation from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help=f"output directory (default: [output] directory, ${OUT_ENV}, ./{DEFAULT_OUT})")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run verification experiments (NAME or all)")
    v.add_argument("name")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("elliptic-solve", help="solve -B lap u + A Psi0'(u) = f for f read from a snapshot")
    e.add_argument("--f", required=True, help="snapshot file holding f")
    e.add_argument("--config", default=None, help="take A, B and the potential from a config file")
    e.add_argument("--A", type=float, default=1.0)
    e.add_argument("--B", type=float, default=1.0)
    e.add_argument("--kind", default="logarithmic", choices=("logarithmic", "quartic"))
    e.add_argument("--theta", type=float, default=0.8)
    e.add_argument("--theta0", type=float, default=1.0)
    e.add_argument("--tol", type=float, default=1e-10)
    e.add_argument("--max-newton", type=int, default=50)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_elliptic)

    c = sub.add_parser("convergence", help="self-convergence study over refined grids (dt scaled with h^2)")
    c.add_argument("--config", required=True)
    c.add_argument("--levels", type=int, default=3)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Energy, dissipation, mean values and the per-step energy-law audit.

All functionals use the solver's own discrete operators (face gradients,
the MAC strain operator), so the audited energy is the one the scheme
actually dissipates.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .elliptic import separation_margin
from .grid import face_l2_sq, kinetic_energy
from .matrices import strain_operator
from .stepper import ConfigError, PhysParams, SimState


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    dt: float
    E: float
    D: float
    phi_mean: float
    sigma_mean: float
    margin: float
    energy_residual: float
    div_max: float = 0.0
    ch_newton_iters: int = 0
    momentum_iters: int = 0
    poisson_iters: int = 0
    clamp_events: int = 0


CSV_FIELDS = [f.name for f in fields(DiagnosticsRecord)]


def _nutrient_weight(params: PhysParams) -> float:
    """chi / lambda for the decoupled variant, 1 otherwise."""
    if not params.lambda_variant:
        return 1.0
    if params.lam == 0.0:
        raise ConfigError("lambda-variant energy needs lambda != 0")
    return params.chi / params.lam


def energy(state: SimState, params: PhysParams) -> float:
    g = state.grid
    phi, sig = state.phi.values, state.sigma.values
    pot = params.potential
    gx = kernels.grad_x(phi, g.hx)
    gy = kernels.grad_y(phi, g.hy)
    if params.lambda_variant:
        sig_sq = 0.5 * _nutrient_weight(params) * sig * sig
    else:
        sig_sq = 0.5 * sig * sig
    bulk = params.A * np.asarray(pot.psi(phi)) + sig_sq + params.chi * sig * (1.0 - phi)
    return (
        kinetic_energy(state.v)
        + float(np.sum(bulk)) * g.cell_area
        + 0.5 * params.B * face_l2_sq(gx, gy, g)
    )


def dissipation(state: SimState, params: PhysParams) -> float:
    g = state.grid
    phi, mu, sig = state.phi.values, state.mu.values, state.sigma.values
    so = strain_operator(g)
    visc = so.dissipation(state.v.u, state.v.w, params.eta(phi))
    mux = kernels.grad_x(mu, g.hx)
    muy = kernels.grad_y(mu, g.hy)
    lam = params.lam_eff
    q = sig + lam * (1.0 - phi)
    qx = kernels.grad_x(q, g.hx)
    qy = kernels.grad_y(q, g.hy)
    return visc + face_l2_sq(mux, muy, g) + _nutrient_weight(params) * face_l2_sq(qx, qy, g)


def work(state: SimState, params: PhysParams) -> float:
    """Right-hand side of the energy law: Oono, consumption and source work."""
    g = state.grid
    phi, mu, sig = state.phi.values, state.mu.values, state.sigma.values
    src = params.source.evaluate(g, state.t)
    lam = params.lam_eff
    react = (-params.consumption * params.h(phi) * sig + src) * (sig + lam * (1.0 - phi))
    total = -params.alpha * (phi - params.c0) * mu + _nutrient_weight(params) * react
    return float(np.sum(total)) * g.cell_area


def energy_law_residual(prev: SimState, nxt: SimState, params: PhysParams, dt: float | None = None) -> float:
    """(E(next) - E(prev)) / dt + D(next) - work(next); sign retained."""
    dt = nxt.t - prev.t if dt is None else dt
    de = (energy(nxt, params) - energy(prev, params)) / dt
    return de + dissipation(nxt, params) - work(nxt, params)


def energy_lower_bound(state: SimState, params: PhysParams) -> float:
    """A |Omega| min Psi + 1/2 w ||sigma||^2 - |chi| ||sigma|| ||1 - phi||."""
    g = state.grid
    sig = state.sigma.values
    ns = math.sqrt(float(np.sum(sig * sig)) * g.cell_area)
    n1 = math.sqrt(float(np.sum((1.0 - state.phi.values) ** 2)) * g.cell_area)
    w = _nutrient_weight(params) if params.lambda_variant else 1.0
    return params.A * g.area * params.potential.minimum() + 0.5 * w * ns * ns - abs(params.chi) * ns * n1


def make_record(prev: SimState | None, state: SimState, params: PhysParams, dt: float, info=None) -> DiagnosticsRecord:
    e = energy(state, params)
    d = dissipation(state, params)
    if prev is None:
        res = 0.0
    else:
        res = (e - energy(prev, params)) / dt + d - work(state, params)
    rec = DiagnosticsRecord(
        step=state.step_index,
        t=state.t,
        dt=dt,
        E=e,
        D=d,
        phi_mean=state.phi.mean(),
        sigma_mean=state.sigma.mean(),
        margin=separation_margin(state.phi),
        energy_residual=res,
    )
    if info is not None:
        rec.div_max = info.div_max
        rec.ch_newton_iters = info.ch_newton_iters
        rec.momentum_iters = info.momentum_iters
        rec.poisson_iters = info.poisson_iters
        rec.clamp_events = info.clamp_events
    return rec


def format_value(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def records_to_csv(records) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_FIELDS)
    for r in records:
        d = asdict(r)
        wr.writerow([format_value(d[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def append_csv_row(path, record: DiagnosticsRecord):
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        if new:
            wr.writerow(CSV_FIELDS)
        d = asdict(record)
        wr.writerow([format_value(d[k]) for k in CSV_FIELDS])


@dataclass
class MeanLawReport:
    max_recurrence_error: float
    worst_step: int
    max_cumulative_error: float
    max_deviation_from_exponential: float
    ok: bool


def _rel(err, ref):
    return abs(err) / max(abs(ref), 1e-300)


def analytic_mean_law_check(records, params: PhysParams, rtol: float = 1e-10) -> MeanLawReport:
    """Audit the phase mean against its discrete and continuous laws.

    Per step, (phi_mean[n+1] - c0)(1 + alpha dt) must equal phi_mean[n] - c0
    relative to |phi_mean[n] - c0|; cumulatively phi_mean[n] must equal
    c0 + (phi_mean[0] - c0) prod 1/(1 + alpha dt_k).  The largest distance
    to c0 + (phi_mean[0] - c0) exp(-alpha t) is reported, not asserted.
    When phi_mean[0] = c0 the errors are measured relative to max(|c0|, 1).
    """
    c0, alpha = params.c0, params.alpha
    dev0 = records[0].phi_mean - c0
    floor = max(abs(c0), 1.0) if dev0 == 0.0 else 0.0
    factor = 1.0
    worst, worst_step, cum, max_exp = 0.0, records[0].step, 0.0, 0.0
    for prev, rec in zip(records[:-1], records[1:]):
        lhs = (rec.phi_mean - c0) * (1.0 + alpha * rec.dt)
        err = _rel(lhs - (prev.phi_mean - c0), max(abs(prev.phi_mean - c0), floor))
        if err > worst:
            worst, worst_step = err, rec.step
        factor /= 1.0 + alpha * rec.dt
        pred = c0 + dev0 * factor
        cum = max(cum, _rel(rec.phi_mean - pred, max(abs(pred - c0), floor)))
        exact = c0 + dev0 * math.exp(-alpha * (rec.t - records[0].t))
        max_exp = max(max_exp, abs(rec.phi_mean - exact))
    return MeanLawReport(worst, worst_step, cum, max_exp, worst <= rtol and cum <= rtol)


def nutrient_mean_law_errors(records, params: PhysParams, grid) -> list:
    """Per-step |sigma_mean[n+1] - sigma_mean[n] - dt S_mean(t[n+1])| / |sigma_mean[n+1]|.

    Only meaningful for zero consumption.
    """
    out = []
    for prev, rec in zip(records[:-1], records[1:]):
        s_mean = float(np.mean(params.source.evaluate(grid, rec.t)))
        err = rec.sigma_mean - prev.sigma_mean - rec.dt * s_mean
        out.append(_rel(err, max(abs(rec.sigma_mean), 1e-300)))
    return out

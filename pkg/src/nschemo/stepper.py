"""Coupled first-order time stepping for the Navier-Stokes-Cahn-Hilliard-nutrient system.

One step runs three substeps in order:

1. Cahn-Hilliard-Oono with convex splitting (Psi0 implicit, the concave
   part explicit), solved by safeguarded Newton on the phase variable with
   the chemical potential eliminated;
2. linearly implicit nutrient advection-diffusion-reaction;
3. projection for the incompressible momentum equation with variable
   viscosity and the capillary/chemotactic forcing (mu + chi sigma) grad phi.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .grid import Grid, MacVelocity, ScalarField
from .matrices import (
    advection_matrix,
    bilaplacian_matrix,
    laplacian_matrix,
    solve_poisson_neumann,
    strain_operator,
)
from .potential import Potential

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Parameter set violates a model hypothesis; the message carries the tag."""


class StepRejected(RuntimeError):
    pass


class SolverAbort(RuntimeError):
    def __init__(self, msg, state=None, dump=None):
        super().__init__(msg)
        self.state = state
        self.dump = dump or {}


@dataclass
class SourceSpec:
    """Nutrient source S(x, y, t) evaluated at cell centers.

    kinds: zero, constant (``value``), gaussian (``value`` offset plus a bump
    of ``amplitude``, ``center`` and ``width``), tabulated (``times`` with
    ``table`` holding one scalar or one cell array per time; linear in t,
    held constant outside), custom (``func(grid, t)``).  Constant and
    gaussian sources are multiplied by exp(-decay t), which makes them
    integrable over [0, inf) when decay > 0.
    """

    kind: str = "zero"
    value: float = 0.0
    amplitude: float = 0.0
    center: tuple = (0.5, 0.5)
    width: float = 0.1
    decay: float = 0.0
    times: Optional[np.ndarray] = None
    table: Optional[np.ndarray] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "gaussian", "tabulated", "custom"):
            raise ConfigError(f"unknown source kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.times is None or self.table is None:
                raise ConfigError("tabulated source needs times and table")
            self.times = np.asarray(self.times, dtype=float)
            self.table = np.asarray(self.table, dtype=float)
            if self.times.ndim != 1 or len(self.times) != len(self.table) or np.any(np.diff(self.times) <= 0):
                raise ConfigError("tabulated source needs strictly increasing times matching the table")
        if self.kind == "custom" and self.func is None:
            raise ConfigError("custom source needs func")
        if self.kind == "gaussian" and not self.width > 0:
            raise ConfigError("gaussian source width must be positive")
        if not (np.isfinite(self.decay) and self.decay >= 0):
            raise ConfigError("source decay must be finite and non-negative")

    def evaluate(self, grid: Grid, t: float) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.shape)
        damp = np.exp(-self.decay * t) if self.decay else 1.0
        if self.kind == "constant":
            return np.full(grid.shape, float(self.value) * damp)
        if self.kind == "gaussian":
            x, y = grid.cell_centers()
            cx, cy = self.center
            r2 = (x - cx) ** 2 + (y - cy) ** 2
            return (self.value + self.amplitude * np.exp(-r2 / (2.0 * self.width**2))) * damp
        if self.kind == "tabulated":
            k = int(np.searchsorted(self.times, t, side="right"))
            if k == 0:
                val = self.table[0]
            elif k == len(self.times):
                val = self.table[-1]
            else:
                t0, t1 = self.times[k - 1], self.times[k]
                a = (t - t0) / (t1 - t0)
                val = (1.0 - a) * self.table[k - 1] + a * self.table[k]
            return np.broadcast_to(np.asarray(val, dtype=float), grid.shape).copy()
        out = np.asarray(self.func(grid, t), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError("source produced non-finite values")
        return np.broadcast_to(out, grid.shape).copy()


@dataclass
class PhysParams:
    A: float = 1.0
    B: float = 1e-3
    chi: float = 0.0
    lam: Optional[float] = None  # active transport; None means lam = chi
    alpha: float = 0.0
    c0: float = 0.0
    consumption: float = 0.0
    eta1: float = 1.0
    eta2: float = 1.0
    potential: Potential = field(default_factory=Potential)
    h_kind: str = "linear"
    source: SourceSpec = field(default_factory=SourceSpec)
    # manufactured-solution hooks: extra forcing in the phase and momentum equations
    phi_forcing: Optional[Callable] = None
    velocity_forcing: Optional[Callable] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.A > 0:
            raise ConfigError("(H5) requires A > 0")
        if not self.B > 0:
            raise ConfigError("(H5) requires B > 0")
        if not self.alpha >= 0:
            raise ConfigError("(H5) requires alpha >= 0")
        if not -1.0 < self.c0 < 1.0:
            raise ConfigError("(H5) requires c0 in (-1, 1)")
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ConfigError("(H1) requires positive viscosities eta1, eta2")
        if self.h_kind != "linear":
            raise ConfigError(f"(H4) unknown interpolation h_kind {self.h_kind!r}")
        for name in ("A", "B", "chi", "alpha", "c0", "consumption", "eta1", "eta2"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"parameter {name} must be finite")

    @property
    def lam_eff(self) -> float:
        return self.chi if self.lam is None else self.lam

    @property
    def lambda_variant(self) -> bool:
        return self.lam is not None and self.lam != self.chi

    def eta(self, phi):
        r = np.clip(phi, -1.0, 1.0)
        return self.eta1 * (1.0 + r) / 2.0 + self.eta2 * (1.0 - r) / 2.0

    def h(self, phi):
        return np.clip(0.5 * (1.0 + np.asarray(phi)), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class SimState:
    v: MacVelocity
    p: ScalarField
    phi: ScalarField
    mu: ScalarField
    sigma: ScalarField
    t: float = 0.0
    step_index: int = 0

    @property
    def grid(self) -> Grid:
        return self.phi.grid


@dataclass
class StepperConfig:
    dt: float = 1e-3
    cfl_max: float = 0.5
    adapt_dt: bool = False
    dt_min: float = 1e-10
    newton_tol: float = 1e-10
    newton_max: int = 30
    projection_tol: float = 1e-9
    linear_tol: float = 1e-12
    coupling: str = "sequential"  # or "picard"
    picard_kmax: int = 1
    picard_tol: float = 1e-10
    upwind: bool = False
    nutrient: bool = True
    grow_after: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0 < self.cfl_max <= 1:
            raise ConfigError("cfl_max must lie in (0, 1]")
        if self.coupling not in ("sequential", "picard"):
            raise ConfigError(f"unknown coupling {self.coupling!r}")
        if self.picard_kmax < 1:
            raise ConfigError("picard k_max must be >= 1")
        for name in ("newton_tol", "projection_tol", "linear_tol", "dt_min"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def kmax(self):
        return self.picard_kmax if self.coupling == "picard" else 1


def default_dt(grid: Grid, params: PhysParams) -> float:
    return 0.1 * min(grid.hx, grid.hy) ** 2 / params.B


def chemical_potential(phi, phi_old, sigma_old, params: PhysParams, grid: Grid):
    """mu = A Psi0'(phi) - A theta0 phi_old - B lap phi - chi sigma_old."""
    pot = params.potential
    return (
        params.A * np.asarray(pot.psi0_prime(phi))
        - params.A * pot.theta0 * phi_old
        - params.B * kernels.laplacian(phi, grid.hx, grid.hy)
        - params.chi * sigma_old
    )


@dataclass
class StepInfo:
    ch_newton_iters: int = 0
    momentum_iters: int = 0
    poisson_iters: int = 0
    picard_iters: int = 0
    clamp_events: int = 0
    div_max: float = 0.0
    cfl: float = 0.0


def make_state(grid, phi, sigma=None, v=None, params: PhysParams | None = None, t=0.0) -> SimState:
    """Assemble an initial state; mu is evaluated from phi and sigma."""
    phi = np.asarray(phi.values if isinstance(phi, ScalarField) else phi, dtype=float)
    phi = np.broadcast_to(phi, grid.shape).copy()
    sig = np.zeros(grid.shape) if sigma is None else np.asarray(
        sigma.values if isinstance(sigma, ScalarField) else sigma, dtype=float
    )
    sig = np.broadcast_to(sig, grid.shape).copy()
    v = MacVelocity.zeros(grid) if v is None else v
    if params is not None:
        pot = params.potential
        mu = (
            params.A * np.asarray(pot.psi_prime(phi))
            - params.B * kernels.laplacian(phi, grid.hx, grid.hy)
            - params.chi * sig
        )
    else:
        mu = np.zeros(grid.shape)
    return SimState(
        v,
        ScalarField.zeros(grid, "p"),
        ScalarField(grid, phi, "phi"),
        ScalarField(grid, mu, "mu"),
        ScalarField(grid, sig, "sigma"),
        t,
        0,
    )


class Stepper:
    """Owns the grid operators and advances one SimState at a time."""

    def __init__(self, grid: Grid, params: PhysParams, cfg: StepperConfig):
        self.grid = grid
        self.params = params
        self.cfg = cfg
        self.lap = laplacian_matrix(grid)
        self.bilap = bilaplacian_matrix(grid)
        self.strain = strain_operator(grid)
        self.eye = sp.identity(grid.nx * grid.ny, format="csr")
        self.dt = cfg.dt
        self.dt_max = cfg.dt
        self._accepted_since_change = 0
        self._precond = {}
        self._ch_lu = {}

    # -- substeps -----------------------------------------------------------

    def ch_substep(self, state: SimState, dt: float, v_adv: MacVelocity | None = None, t_new=None):
        """Convex-split Cahn-Hilliard-Oono step; returns (phi, mu, newton_iters)."""
        g, prm, cfg = self.grid, self.params, self.cfg
        pot = prm.potential
        v_adv = state.v if v_adv is None else v_adv
        t_new = state.t + dt if t_new is None else t_new
        phi_old = state.phi.values
        sig_old = state.sigma.values
        hx, hy = g.hx, g.hy
        A, B = prm.A, prm.B
        rate = 1.0 / dt + prm.alpha
        # explicit part of mu: concave term and chemotaxis
        mu_explicit = -A * pot.theta0 * phi_old
        if prm.chi != 0.0:
            # skipped for chi = 0 so a disabled nutrient cannot touch the phase bits
            mu_explicit = mu_explicit - prm.chi * sig_old
        rhs = phi_old / dt + prm.alpha * prm.c0
        if prm.phi_forcing is not None:
            rhs = rhs + np.asarray(prm.phi_forcing(g, t_new), dtype=float)
        moving = v_adv.max_abs() > 0.0
        if moving:
            cmat = advection_matrix(g, v_adv.u, v_adv.w, cfg.upwind)
        bound = 1.0 - pot.eps_barrier

        def residual(phi):
            mu = A * np.asarray(pot.psi0_prime(phi)) + mu_explicit - B * kernels.laplacian(phi, hx, hy)
            r = rate * phi - kernels.laplacian(mu, hx, hy) - rhs
            if moving:
                r = r + kernels.advect(v_adv.u, v_adv.w, phi, hx, hy, cfg.upwind)
            return r, mu

        def norm(r):
            return float(np.sqrt(np.sum(r * r) * g.cell_area))

        phi = phi_old.copy()
        if pot.singular and np.max(np.abs(phi)) >= bound:
            raise StepRejected("phase field at the singular barrier")
        base = rate * self.eye + B * self.bilap
        if moving:
            base = base + cmat

        def factor(x):
            d2 = A * np.asarray(pot.psi0_second(x)).ravel()
            try:
                return spla.splu((base - self.lap @ sp.diags(d2)).tocsc(), permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise StepRejected(f"CH Newton factorization failed: {exc}") from exc

        r, mu = residual(phi)
        res = norm(r)
        # chord iteration: the Jacobian is refreshed only when contraction is poor
        # a factorization from an earlier step with the same dt is reused as a
        # chord preconditioner until contraction degrades
        cached = self._ch_lu.get("lu") if self._ch_lu.get("dt") == dt else None
        if cached is None:
            lu, fresh = factor(phi), True
        else:
            lu, fresh = cached, False
        iters = 0
        for iters in range(1, cfg.newton_max + 1):
            delta = lu.solve(-r.ravel()).reshape(phi.shape)
            if not np.all(np.isfinite(delta)):
                raise StepRejected("CH Newton produced non-finite update")
            step_size = float(np.max(np.abs(delta)))
            s = 1.0
            accepted = False
            for _ in range(50):
                trial = phi + s * delta
                if (not pot.singular) or np.max(np.abs(trial)) < bound:
                    r_t, mu_t = residual(trial)
                    res_t = norm(r_t)
                    if res_t < res or s * step_size <= cfg.newton_tol:
                        accepted = True
                        break
                s *= 0.5
            if not accepted:
                if not fresh:
                    lu, fresh = factor(phi), True
                    continue
                raise StepRejected(f"CH line search failed (residual {res:.3e})")
            converged = s == 1.0 and step_size <= cfg.newton_tol
            poor = s < 1.0 or res_t > 0.1 * res
            phi, r, mu, res = trial, r_t, mu_t, res_t
            if converged:
                break
            if poor:
                lu, fresh = factor(phi), True
            else:
                fresh = False
        else:
            raise StepRejected(f"CH Newton did not converge in {cfg.newton_max} iterations")
        self._ch_lu = {"dt": dt, "lu": lu}
        return phi, mu, iters

    def nutrient_substep(self, state: SimState, phi_new, dt: float, t_new, v_adv=None):
        g, prm, cfg = self.grid, self.params, self.cfg
        v_adv = state.v if v_adv is None else v_adv
        rhs = (
            state.sigma.values / dt
            - prm.lam_eff * kernels.laplacian(phi_new, g.hx, g.hy)
            + prm.source.evaluate(g, t_new)
        )
        mat = self.eye / dt - self.lap
        if prm.consumption != 0.0:
            mat = mat + sp.diags(prm.consumption * prm.h(phi_new).ravel())
        if v_adv.max_abs() > 0.0:
            mat = mat + advection_matrix(g, v_adv.u, v_adv.w, cfg.upwind)
        try:
            lu = spla.splu(mat.tocsc(), permc_spec="MMD_AT_PLUS_A")
            sig = lu.solve(rhs.ravel()).reshape(g.shape)
        except RuntimeError as exc:
            raise StepRejected(f"nutrient solve failed: {exc}") from exc
        if not np.all(np.isfinite(sig)):
            raise StepRejected("nutrient solve produced non-finite values")
        return sig

    def capillary_forcing(self, phi, mu, sigma):
        """(mu + chi sigma) grad phi on faces, with arithmetic face averages."""
        g = self.grid
        q = mu + self.params.chi * sigma if self.params.chi != 0.0 else mu
        fu = kernels.grad_x(phi, g.hx)
        fw = kernels.grad_y(phi, g.hy)
        fu[1:-1, :] *= 0.5 * (q[1:, :] + q[:-1, :])
        fw[:, 1:-1] *= 0.5 * (q[:, 1:] + q[:, :-1])
        return fu, fw

    def ns_substep(self, state: SimState, phi_new, mu_new, sigma_new, dt: float, t_new):
        """Projection step; returns (u, w, p, momentum_iters, div_max)."""
        g, prm, cfg = self.grid, self.params, self.cfg
        so = self.strain
        u0, w0 = state.v.u, state.v.w
        fu, fw = self.capillary_forcing(phi_new, mu_new, sigma_new)
        if state.v.max_abs() > 0.0:
            cu, cw = kernels.momentum_convection(u0, w0, g.hx, g.hy)
            fu = fu - cu
            fw = fw - cw
        if prm.velocity_forcing is not None:
            su, sw = prm.velocity_forcing(g, t_new)
            fu = fu + su
            fw = fw + sw
        rhs_u = u0 / dt + fu
        rhs_w = w0 / dt + fw
        b = so.pack(rhs_u, rhs_w) * g.cell_area
        x0 = so.pack(u0, w0)
        if not np.any(b) and not np.any(x0):
            ustar, wstar = np.zeros_like(u0), np.zeros_like(w0)
            iters = 0
        else:
            eta = prm.eta(phi_new)
            mat = (so.viscous_matrix(eta) + sp.identity(so.nu + so.nw) * (g.cell_area / dt)).tocsr()
            precond = self._momentum_preconditioner(dt)
            count = [0]

            def cb(_):
                count[0] += 1

            x, info = spla.cg(mat, b, x0=x0, rtol=cfg.linear_tol, atol=0.0, maxiter=20 * len(b), M=precond, callback=cb)
            iters = count[0]
            if info != 0 or not np.all(np.isfinite(x)):
                raise StepRejected(f"momentum CG failed (info={info})")
            ustar, wstar = so.unpack(x)

        div_star = kernels.divergence(ustar, wstar, g.hx, g.hy)
        p = solve_poisson_neumann(g, div_star / dt)
        u = ustar - dt * kernels.grad_x(p, g.hx)
        w = wstar - dt * kernels.grad_y(p, g.hy)
        div_max = float(np.max(np.abs(kernels.divergence(u, w, g.hx, g.hy))))
        if div_max > cfg.projection_tol:
            raise StepRejected(f"projection left divergence {div_max:.3e}")
        return u, w, p, iters, div_max

    def _momentum_preconditioner(self, dt):
        """LU of the constant-viscosity operator at the geometric mean viscosity.

        Spectrally equivalent to the variable-viscosity operator with
        condition number at most max(eta1, eta2) / min(eta1, eta2).
        """
        if dt not in self._precond:
            g, so = self.grid, self.strain
            eta_ref = float(np.sqrt(self.params.eta1 * self.params.eta2))
            ref = so.viscous_matrix(np.full(g.shape, eta_ref)) + sp.identity(so.nu + so.nw) * (g.cell_area / dt)
            lu = spla.splu(ref.tocsc(), permc_spec="MMD_AT_PLUS_A")
            if len(self._precond) > 8:
                self._precond.clear()
            self._precond[dt] = spla.LinearOperator(ref.shape, matvec=lu.solve, dtype=float)
        return self._precond[dt]

    # -- composition --------------------------------------------------------

    def advance(self, state: SimState, dt: float):
        """One step of size dt without adaptivity; returns (state, StepInfo)."""
        prm, cfg = self.params, self.cfg
        pot = prm.potential
        clamps0 = pot.clamp_events
        t_new = state.t + dt
        info = StepInfo()
        v_adv = state.v
        prev = None
        for k in range(cfg.kmax):
            phi, mu, nit = self.ch_substep(state, dt, v_adv, t_new)
            info.ch_newton_iters += nit
            if cfg.nutrient:
                sigma = self.nutrient_substep(state, phi, dt, t_new, v_adv)
            else:
                sigma = state.sigma.values
            u, w, p, mit, div_max = self.ns_substep(state, phi, mu, sigma, dt, t_new)
            info.momentum_iters += mit
            info.poisson_iters += 1
            info.picard_iters = k + 1
            info.div_max = div_max
            if k + 1 < cfg.kmax:
                cur = (phi, sigma, u, w)
                if prev is not None:
                    change = max(float(np.max(np.abs(a - b))) for a, b in zip(cur, prev))
                    if change < cfg.picard_tol:
                        break
                prev = cur
                v_adv = MacVelocity(self.grid, u, w)
        info.clamp_events = pot.clamp_events - clamps0
        g = self.grid
        new = SimState(
            MacVelocity(g, u, w),
            ScalarField(g, p, "p"),
            ScalarField(g, phi, "phi"),
            ScalarField(g, mu, "mu"),
            ScalarField(g, sigma, "sigma"),
            t_new,
            state.step_index + 1,
        )
        info.cfl = cfl_number(new.v, dt)
        return new, info

    def step(self, state: SimState, dt_cap: float | None = None):
        """Advance one accepted step with optional dt adaptation."""
        cfg = self.cfg
        dt = self.dt if dt_cap is None else min(self.dt, dt_cap)
        if cfg.adapt_dt:
            while cfl_number(state.v, dt) > cfg.cfl_max and dt > cfg.dt_min:
                dt *= 0.5
                self._note_change(dt)
        while True:
            try:
                new, info = self.advance(state, dt)
                if cfg.adapt_dt and info.cfl > cfg.cfl_max:
                    raise StepRejected(f"CFL {info.cfl:.3f} exceeds {cfg.cfl_max}")
                break
            except StepRejected as exc:
                if not cfg.adapt_dt:
                    raise SolverAbort(f"step rejected at t={state.t:.6g}: {exc}", state) from exc
                dt *= 0.5
                self._note_change(dt)
                log.info("step rejected (%s); dt -> %.3e", exc, dt)
                if dt < cfg.dt_min:
                    raise SolverAbort(
                        f"dt fell below dt_min at t={state.t:.6g}: {exc}",
                        state,
                        {"dt": dt, "t": state.t, "step": state.step_index, "reason": str(exc)},
                    ) from exc
        if cfg.adapt_dt:
            self._accepted_since_change += 1
            if self._accepted_since_change >= cfg.grow_after and self.dt < self.dt_max:
                self._note_change(min(2.0 * self.dt, self.dt_max))
        return new, info, dt

    def _note_change(self, dt):
        self.dt = dt
        self._accepted_since_change = 0


def cfl_number(v: MacVelocity, dt: float) -> float:
    g = v.grid
    return float(np.max(np.abs(v.u)) * dt / g.hx + np.max(np.abs(v.w)) * dt / g.hy)


def step(state: SimState, params: PhysParams, cfg: StepperConfig) -> SimState:
    """Advance a state by one step with a fresh stepper (convenience wrapper)."""
    new, _, _ = Stepper(state.grid, params, cfg).step(state)
    return new


def ch_substep(state, params, dt, cfg: StepperConfig | None = None):
    cfg = cfg or StepperConfig(dt=dt)
    phi, mu, _ = Stepper(state.grid, params, cfg).ch_substep(state, dt)
    return ScalarField(state.grid, phi, "phi"), ScalarField(state.grid, mu, "mu")


def nutrient_substep(state, phi_new, params, dt, cfg: StepperConfig | None = None):
    cfg = cfg or StepperConfig(dt=dt)
    phi = phi_new.values if isinstance(phi_new, ScalarField) else phi_new
    sig = Stepper(state.grid, params, cfg).nutrient_substep(state, phi, dt, state.t + dt)
    return ScalarField(state.grid, sig, "sigma")


def ns_substep(state, phi_new, mu_new, sigma_new, params, dt, cfg: StepperConfig | None = None):
    cfg = cfg or StepperConfig(dt=dt)
    vals = [a.values if isinstance(a, ScalarField) else a for a in (phi_new, mu_new, sigma_new)]
    u, w, p, _, _ = Stepper(state.grid, params, cfg).ns_substep(state, *vals, dt, state.t + dt)
    return MacVelocity(state.grid, u, w), ScalarField(state.grid, p, "p")

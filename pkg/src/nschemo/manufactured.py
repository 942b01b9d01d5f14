"""Manufactured solutions for the coupled system and the elliptic problem.

The exact fields are

    phi*   = 0.5 cos(pi x / lx) cos(pi y / ly) cos t
    sigma* = 0.5 + 0.25 cos(2 pi x / lx) cos(pi y / ly) (1 + 0.5 sin t)
    v*     = curl of  a sin^2(pi x / lx) sin^2(pi y / ly) cos t,  p* = 0

and the residuals of the model equations are returned as extra forcing
terms (phase equation, nutrient source, momentum equation).  Derivatives are
taken symbolically with sympy and lambdified to numpy.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sy

from .grid import Grid, MacVelocity
from .stepper import PhysParams, SimState, SourceSpec

_x, _y, _t = sy.symbols("x y t", real=True)


def _exact_exprs(lx, ly, amp):
    cx = sy.cos(sy.pi * _x / lx)
    cy = sy.cos(sy.pi * _y / ly)
    phi = sy.Rational(1, 2) * cx * cy * sy.cos(_t)
    sig = sy.Rational(1, 2) + sy.Rational(1, 4) * sy.cos(2 * sy.pi * _x / lx) * cy * (1 + sy.sin(_t) / 2)
    psi = amp * sy.sin(sy.pi * _x / lx) ** 2 * sy.sin(sy.pi * _y / ly) ** 2 * sy.cos(_t)
    u = sy.diff(psi, _y)
    w = -sy.diff(psi, _x)
    return phi, sig, psi, u, w


def _lap(f):
    return sy.diff(f, _x, 2) + sy.diff(f, _y, 2)


@lru_cache(maxsize=8)
def _forcing_functions(A, B, chi, lam, alpha, c0, cons, eta1, eta2, theta, theta0, lx, ly, amp):
    phi, sig, psi, u, w = _exact_exprs(lx, ly, amp)
    mu = A * (theta * sy.atanh(phi) - theta0 * phi) - B * _lap(phi) - chi * sig
    f_phi = (
        sy.diff(phi, _t)
        + sy.diff(u * phi, _x)
        + sy.diff(w * phi, _y)
        - _lap(mu)
        + alpha * (phi - c0)
    )
    h = (1 + phi) / 2
    f_sig = (
        sy.diff(sig, _t)
        + sy.diff(u * sig, _x)
        + sy.diff(w * sig, _y)
        - _lap(sig)
        + lam * _lap(phi)
        + cons * h * sig
    )
    eta = eta1 * (1 + phi) / 2 + eta2 * (1 - phi) / 2
    d11 = sy.diff(u, _x)
    d22 = sy.diff(w, _y)
    d12 = (sy.diff(u, _y) + sy.diff(w, _x)) / 2
    q = mu + chi * sig
    f_u = (
        sy.diff(u, _t)
        + sy.diff(u * u, _x)
        + sy.diff(u * w, _y)
        - sy.diff(2 * eta * d11, _x)
        - sy.diff(2 * eta * d12, _y)
        - q * sy.diff(phi, _x)
    )
    f_w = (
        sy.diff(w, _t)
        + sy.diff(u * w, _x)
        + sy.diff(w * w, _y)
        - sy.diff(2 * eta * d12, _x)
        - sy.diff(2 * eta * d22, _y)
        - q * sy.diff(phi, _y)
    )
    args = (_x, _y, _t)
    mk = lambda e: sy.lambdify(args, e, "numpy")  # noqa: E731
    return {
        "phi": mk(phi),
        "sigma": mk(sig),
        "psi": mk(psi),
        "u": mk(u),
        "w": mk(w),
        "f_phi": mk(f_phi),
        "f_sigma": mk(f_sig),
        "f_u": mk(f_u),
        "f_w": mk(f_w),
    }


def _on(shape, values):
    return np.array(np.broadcast_to(values, shape), dtype=float)


class Manufactured:
    """Exact fields and forcing hooks for one parameter set."""

    def __init__(self, params: PhysParams, lx=1.0, ly=1.0, amp=0.05):
        pot = params.potential
        if not pot.singular:
            raise ValueError("manufactured forcing is built for the logarithmic potential")
        self.params = params
        self.lx, self.ly = lx, ly
        self.fn = _forcing_functions(
            params.A, params.B, params.chi, params.lam_eff, params.alpha, params.c0,
            params.consumption, params.eta1, params.eta2, pot.theta, pot.theta0,
            float(lx), float(ly), float(amp),
        )

    def phi(self, grid: Grid, t):
        x, y = grid.cell_centers()
        return _on(grid.shape, self.fn["phi"](x, y, t))

    def sigma(self, grid: Grid, t):
        x, y = grid.cell_centers()
        return _on(grid.shape, self.fn["sigma"](x, y, t))

    def velocity(self, grid: Grid, t):
        return MacVelocity.from_streamfunction(grid, lambda x, y: self.fn["psi"](x, y, t))

    def velocity_exact_faces(self, grid: Grid, t):
        xu, yu = grid.x_faces()
        xw, yw = grid.y_faces()
        return _on(xu.shape, self.fn["u"](xu, yu, t)), _on(xw.shape, self.fn["w"](xw, yw, t))

    def phi_forcing(self, grid: Grid, t):
        x, y = grid.cell_centers()
        return _on(grid.shape, self.fn["f_phi"](x, y, t))

    def velocity_forcing(self, grid: Grid, t):
        xu, yu = grid.x_faces()
        xw, yw = grid.y_faces()
        return _on(xu.shape, self.fn["f_u"](xu, yu, t)), _on(xw.shape, self.fn["f_w"](xw, yw, t))

    def forced_params(self) -> PhysParams:
        """Copy of the parameters with the three forcing hooks installed."""
        from dataclasses import replace

        fs = self.fn["f_sigma"]

        def source(grid, t):
            x, y = grid.cell_centers()
            return _on(grid.shape, fs(x, y, t))

        return replace(
            self.params,
            source=SourceSpec(kind="custom", func=source),
            phi_forcing=self.phi_forcing,
            velocity_forcing=self.velocity_forcing,
        )

    def initial_state(self, grid: Grid, t0=0.0) -> SimState:
        from .stepper import make_state

        return make_state(grid, self.phi(grid, t0), self.sigma(grid, t0), self.velocity(grid, t0), self.params, t0)

    def errors(self, state: SimState) -> dict:
        """Discrete l2 errors of phi, sigma and velocity against the exact fields.

        The velocity reference is the discretely solenoidal stream-function
        interpolant used for the initial state (O(h^2) from point values).
        """
        g, t = state.grid, state.t
        area = g.cell_area
        ep = state.phi.values - self.phi(g, t)
        es = state.sigma.values - self.sigma(g, t)
        ref = self.velocity(g, t)
        eu = state.v.u - ref.u
        ew = state.v.w - ref.w
        return {
            "phi": float(np.sqrt(np.sum(ep * ep) * area)),
            "sigma": float(np.sqrt(np.sum(es * es) * area)),
            "v": float(np.sqrt((np.sum(eu * eu) + np.sum(ew * ew)) * area)),
        }


def elliptic_manufactured(grid: Grid, A: float, B: float, potential, amp=0.5):
    """u* = amp cos(pi x/lx) cos(pi y/ly) with f := -B lap_h u* + A Psi0'(u*) built discretely."""
    from . import kernels

    x, y = grid.cell_centers()
    u = amp * np.cos(np.pi * x / grid.lx) * np.cos(np.pi * y / grid.ly)
    f = -B * kernels.laplacian(u, grid.hx, grid.hy) + A * np.asarray(potential.psi0_prime(u))
    return u, f


def elliptic_continuous(grid: Grid, A: float, B: float, potential, amp=0.5):
    """Same u*, with f from the continuous Laplacian; used for order studies."""
    x, y = grid.cell_centers()
    c = np.cos(np.pi * x / grid.lx) * np.cos(np.pi * y / grid.ly)
    u = amp * c
    k2 = (np.pi / grid.lx) ** 2 + (np.pi / grid.ly) ** 2
    f = B * k2 * u + A * np.asarray(potential.psi0_prime(u))
    return u, f

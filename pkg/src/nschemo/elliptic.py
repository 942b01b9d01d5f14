"""Damped Newton solver for -B lap u + A Psi0'(u) = f with Neumann conditions.

The map u -> -B lap u + A Psi0'(u) is monotone, so every Newton system is
symmetric positive definite.  Steps are halved until the iterate stays
strictly inside (-1, 1) and the residual decreases.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .grid import ScalarField
from .matrices import laplacian_matrix
from .potential import Potential


class EllipticSolveError(RuntimeError):
    def __init__(self, msg, best=None, history=None):
        super().__init__(msg)
        self.best = best
        self.history = history or []


class LinearSolverError(EllipticSolveError):
    pass


@dataclass
class EllipticProblem:
    A: float
    B: float
    potential: Potential
    f: ScalarField
    tol_residual: float = 1e-10
    max_newton: int = 50

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("elliptic problem needs A > 0 and B > 0")
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")


@dataclass
class EllipticSolution:
    u: ScalarField
    newton_iters: int
    final_residual: float
    margin: float
    residual_history: list = field(default_factory=list)
    linear_iters: int = 0


def separation_margin(u) -> float:
    """1 - ||u||_inf; non-positive values flag an invalid phase field."""
    values = u.values if isinstance(u, ScalarField) else np.asarray(u)
    return float(1.0 - np.max(np.abs(values)))


def default_initial_guess(prob: EllipticProblem) -> np.ndarray:
    slope = prob.potential.psi0_second(0.0)
    if slope <= 0:
        slope = 1.0
    guess = np.clip(prob.f.mean() / (prob.A * slope), -0.9, 0.9)
    return np.full(prob.f.grid.shape, guess)


def solve_singular_neumann(prob: EllipticProblem, u_init=None) -> EllipticSolution:
    grid = prob.f.grid
    pot = prob.potential
    hx, hy, area = grid.hx, grid.hy, grid.cell_area
    bound = 1.0 - pot.eps_barrier
    f = prob.f.values

    if u_init is None:
        u = default_initial_guess(prob)
    else:
        u = np.array(u_init.values if isinstance(u_init, ScalarField) else u_init, dtype=float)
        if pot.singular:
            u = np.clip(u, -1.0 + 1e-8, 1.0 - 1e-8)

    def residual(x):
        return -prob.B * kernels.laplacian(x, hx, hy) + prob.A * np.asarray(pot.psi0_prime(x)) - f

    def norm(r):
        return float(np.sqrt(np.sum(r * r) * area))

    stencil = prob.B * (4.0 / hx**2 + 4.0 / hy**2)

    def target(x):
        # a unit rounding of x perturbs the residual by about eps * |dF/du| * |x|
        scale = (stencil + prob.A * np.abs(np.asarray(pot.psi0_second(x)))) * np.abs(x) + np.abs(f)
        return max(prob.tol_residual, 16.0 * np.finfo(float).eps * norm(scale))

    lap = laplacian_matrix(grid)
    r = residual(u)
    res = norm(r)
    history = [res]
    lin_total = 0

    for it in range(1, prob.max_newton + 1):
        if res <= target(u):
            return EllipticSolution(
                ScalarField(grid, u, "u"), it - 1, res, separation_margin(u), history, lin_total
            )
        diag = prob.A * np.asarray(pot.psi0_second(u)).ravel()
        jac = (-prob.B * lap + sp.diags(diag)).tocsr()
        precond = sp.diags(1.0 / jac.diagonal())
        # inexact Newton: linear accuracy slaved to the outer tolerance
        atol = 1e-2 * prob.tol_residual / np.sqrt(area)
        count = [0]

        def cb(_):
            count[0] += 1

        delta, info = spla.cg(jac, -r.ravel(), rtol=1e-6, atol=atol, maxiter=10 * u.size, M=precond, callback=cb)
        lin_total += count[0]
        if info < 0 or not np.all(np.isfinite(delta)):
            raise LinearSolverError("CG breakdown in Newton system", ScalarField(grid, u, "u"), history)
        delta = delta.reshape(u.shape)

        step = 1.0
        accepted = False
        for _ in range(60):
            trial = u + step * delta
            if (not pot.singular) or np.max(np.abs(trial)) < bound:
                r_trial = residual(trial)
                res_trial = norm(r_trial)
                if res_trial < res:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            if res <= 10.0 * target(u):
                # residual is at the rounding floor of the stencil
                break
            raise EllipticSolveError(
                f"line search failed at Newton iteration {it} (residual {res:.3e})",
                ScalarField(grid, u, "u"),
                history,
            )
        u, r, res = trial, r_trial, res_trial
        if pot.singular and not np.max(np.abs(u)) < 1.0:
            raise AssertionError("Newton iterate left (-1, 1)")
        history.append(res)

    if res <= 10.0 * target(u):
        return EllipticSolution(ScalarField(grid, u, "u"), len(history) - 1, res, separation_margin(u), history, lin_total)
    raise EllipticSolveError(
        f"Newton did not converge in {prob.max_newton} iterations (residual {res:.3e})",
        ScalarField(grid, u, "u"),
        history,
    )


@dataclass
class MarginReport:
    scales: list
    margins: list
    psi0_prime_inf: list
    newton_iters: list
    ok: bool


def scaled_family(base: EllipticProblem, scales=(1.0, 2.0, 4.0, 8.0)):
    out = []
    for s in scales:
        fs = ScalarField(base.f.grid, s * base.f.values, base.f.name)
        out.append(EllipticProblem(base.A, base.B, base.potential, fs, base.tol_residual, base.max_newton))
    return out


def margin_vs_data_bound(problems, scales=None) -> MarginReport:
    """Solve a family of problems and report margins and sup |Psi0'(u)|."""
    margins, psi_inf, iters = [], [], []
    for prob in problems:
        sol = solve_singular_neumann(prob)
        margins.append(sol.margin)
        psi_inf.append(float(np.max(np.abs(prob.potential.psi0_prime(sol.u.values)))))
        iters.append(sol.newton_iters)
    if scales is None:
        scales = list(range(len(problems)))
    return MarginReport(list(scales), margins, psi_inf, iters, all(m > 0 for m in margins))

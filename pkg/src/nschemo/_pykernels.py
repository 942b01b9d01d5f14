"""Pure numpy stencil kernels.

Array layout: cell arrays are (nx, ny) indexed [i, j] with i along x.
x-face arrays are (nx + 1, ny), y-face arrays are (nx, ny + 1).
Boundary faces carry zero normal flux.
"""
import numpy as np


def grad_x(f, hx):
    nx, ny = f.shape
    g = np.zeros((nx + 1, ny))
    g[1:-1, :] = (f[1:, :] - f[:-1, :]) / hx
    return g


def grad_y(f, hy):
    nx, ny = f.shape
    g = np.zeros((nx, ny + 1))
    g[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / hy
    return g


def divergence(u, w, hx, hy):
    return (u[1:, :] - u[:-1, :]) / hx + (w[:, 1:] - w[:, :-1]) / hy


def laplacian(f, hx, hy):
    return divergence(grad_x(f, hx), grad_y(f, hy), hx, hy)


def advect(u, w, f, hx, hy, upwind=False):
    nx, ny = f.shape
    fx = np.zeros((nx + 1, ny))
    fy = np.zeros((nx, ny + 1))
    ui = u[1:-1, :]
    wi = w[:, 1:-1]
    if upwind:
        fx[1:-1, :] = ui * np.where(ui > 0.0, f[:-1, :], f[1:, :])
        fy[:, 1:-1] = wi * np.where(wi > 0.0, f[:, :-1], f[:, 1:])
    else:
        fx[1:-1, :] = ui * (0.5 * (f[:-1, :] + f[1:, :]))
        fy[:, 1:-1] = wi * (0.5 * (f[:, :-1] + f[:, 1:]))
    return divergence(fx, fy, hx, hy)


def momentum_convection(u, w, hx, hy):
    """Conservative centered div(v v) on both face families.

    Tangential ghosts use odd reflection, so corner fluxes on walls vanish.
    """
    nx = w.shape[0]
    ny = u.shape[1]
    nu = np.zeros_like(u)
    nw = np.zeros_like(w)

    # u-momentum: d(uu)/dx at cells, d(uw)/dy at nodes
    uc = 0.5 * (u[1:, :] + u[:-1, :])
    uu = uc * uc
    u_node = np.zeros((nx + 1, ny + 1))
    u_node[:, 1:-1] = 0.5 * (u[:, 1:] + u[:, :-1])
    w_node = np.zeros((nx + 1, ny + 1))
    w_node[1:-1, :] = 0.5 * (w[1:, :] + w[:-1, :])
    uw = u_node * w_node
    nu[1:-1, :] = (uu[1:, :] - uu[:-1, :]) / hx + (uw[1:-1, 1:] - uw[1:-1, :-1]) / hy

    # w-momentum: d(uw)/dx at nodes, d(ww)/dy at cells
    wc = 0.5 * (w[:, 1:] + w[:, :-1])
    ww = wc * wc
    nw[:, 1:-1] = (uw[1:, 1:-1] - uw[:-1, 1:-1]) / hx + (ww[:, 1:] - ww[:, :-1]) / hy
    return nu, nw

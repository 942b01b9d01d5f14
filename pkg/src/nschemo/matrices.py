"""Sparse assembly of the grid operators used by the implicit solves.

Cell unknowns are flattened C-order from (nx, ny) arrays: k = i * ny + j.
Every matrix here reproduces the corresponding stencil kernel exactly up to
rounding.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.sparse as sp

from .grid import Grid


def _neumann_1d(n, h):
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


@lru_cache(maxsize=16)
def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    dxx = _neumann_1d(grid.nx, grid.hx)
    dyy = _neumann_1d(grid.ny, grid.hy)
    lap = sp.kron(dxx, sp.identity(grid.ny)) + sp.kron(sp.identity(grid.nx), dyy)
    return lap.tocsr()


@lru_cache(maxsize=16)
def bilaplacian_matrix(grid: Grid) -> sp.csr_matrix:
    lap = laplacian_matrix(grid)
    return (lap @ lap).tocsr()


def advection_matrix(grid: Grid, u: np.ndarray, w: np.ndarray, upwind: bool = False) -> sp.csr_matrix:
    """Matrix of f -> div(v f) with centered or upwind face interpolation."""
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []

    # interior x-faces between cells (i-1, j) and (i, j)
    ui = u[1:-1, :]
    left, right = idx[:-1, :].ravel(), idx[1:, :].ravel()
    if upwind:
        wl = np.where(ui > 0, ui, 0.0).ravel()
        wr = np.where(ui > 0, 0.0, ui).ravel()
    else:
        wl = wr = 0.5 * ui.ravel()
    # flux F = wl f_left + wr f_right leaves left cell, enters right cell
    for r, sign in ((left, 1.0 / hx), (right, -1.0 / hx)):
        rows += [r, r]
        cols += [left, right]
        vals += [sign * wl, sign * wr]

    wi = w[:, 1:-1]
    low, up = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    if upwind:
        wl = np.where(wi > 0, wi, 0.0).ravel()
        wr = np.where(wi > 0, 0.0, wi).ravel()
    else:
        wl = wr = 0.5 * wi.ravel()
    for r, sign in ((low, 1.0 / hy), (up, -1.0 / hy)):
        rows += [r, r]
        cols += [low, up]
        vals += [sign * wl, sign * wr]

    n = nx * ny
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


class StrainOperator:
    """Discrete symmetric gradient on the MAC grid.

    Unknowns are the interior faces, ordered [u(1:nx, :), w(:, 1:ny)].
    Normal strains live at cell centers, the shear strain at nodes, with odd
    ghost reflection of tangential velocity on walls.  The viscous operator
    is assembled as G^T W G so that its energy product equals the discrete
    dissipation functional exactly.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
        self.nu = (nx - 1) * ny
        self.nw = nx * (ny - 1)
        nu, nw = self.nu, self.nw

        # full-face index maps; -1 for wall-normal faces (fixed at zero)
        uidx = -np.ones((nx + 1, ny), dtype=np.int64)
        uidx[1:-1, :] = np.arange(nu).reshape(nx - 1, ny)
        widx = -np.ones((nx, ny + 1), dtype=np.int64)
        widx[:, 1:-1] = nu + np.arange(nw).reshape(nx, ny - 1)
        self.uidx, self.widx = uidx, widx
        ncell = nx * ny
        cell = np.arange(ncell).reshape(nx, ny)

        def mat(entries, nrows):
            r, c, v = [], [], []
            for rows, cols, coef in entries:
                m = cols >= 0
                r.append(rows[m])
                c.append(cols[m])
                v.append(np.broadcast_to(coef, rows.shape)[m])
            return sp.csr_matrix(
                (np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(nrows, nu + nw)
            )

        # du/dx and dw/dy at cell centers
        self.dudx = mat([(cell, uidx[1:, :], 1.0 / hx), (cell, uidx[:-1, :], -1.0 / hx)], ncell)
        self.dwdy = mat([(cell, widx[:, 1:], 1.0 / hy), (cell, widx[:, :-1], -1.0 / hy)], ncell)

        # shear at nodes (nx+1, ny+1)
        nnode = (nx + 1) * (ny + 1)
        node = np.arange(nnode).reshape(nx + 1, ny + 1)
        ent = []
        # du/dy: interior node rows j=1..ny-1
        ent.append((node[:, 1:-1], uidx[:, 1:], 0.5 / hy))
        ent.append((node[:, 1:-1], uidx[:, :-1], -0.5 / hy))
        # wall rows: ghost u = -u gives du/dy = +-2 u / hy
        ent.append((node[:, 0], uidx[:, 0], 0.5 * 2.0 / hy))
        ent.append((node[:, -1], uidx[:, -1], -0.5 * 2.0 / hy))
        # dw/dx
        ent.append((node[1:-1, :], widx[1:, :], 0.5 / hx))
        ent.append((node[1:-1, :], widx[:-1, :], -0.5 / hx))
        ent.append((node[0, :], widx[0, :], 0.5 * 2.0 / hx))
        ent.append((node[-1, :], widx[-1, :], -0.5 * 2.0 / hx))
        self.shear = mat(ent, nnode)

        # node control areas: half on edges, quarter at corners
        wn = np.ones((nx + 1, ny + 1))
        wn[0, :] *= 0.5
        wn[-1, :] *= 0.5
        wn[:, 0] *= 0.5
        wn[:, -1] *= 0.5
        self.node_weight = wn.ravel() * grid.cell_area

        # node averaging of cell values (mean of the adjacent cells)
        cnt = np.zeros((nx + 1, ny + 1))
        rows, cols = [], []
        for di in (0, 1):
            for dj in (0, 1):
                nd = node[di : di + nx, dj : dj + ny]
                rows.append(nd.ravel())
                cols.append(cell.ravel())
                cnt[di : di + nx, dj : dj + ny] += 1.0
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        self.cell_to_node = sp.csr_matrix(
            (1.0 / cnt.ravel()[rows], (rows, cols)), shape=(nnode, ncell)
        )

    def pack(self, u, w):
        return np.concatenate([u[1:-1, :].ravel(), w[:, 1:-1].ravel()])

    def unpack(self, x):
        g = self.grid
        u = np.zeros((g.nx + 1, g.ny))
        w = np.zeros((g.nx, g.ny + 1))
        u[1:-1, :] = x[: self.nu].reshape(g.nx - 1, g.ny)
        w[:, 1:-1] = x[self.nu :].reshape(g.nx, g.ny - 1)
        return u, w

    def weights(self, eta_cells):
        eta_c = np.asarray(eta_cells).ravel()
        eta_n = self.cell_to_node @ eta_c
        wc = 2.0 * eta_c * self.grid.cell_area
        wn = 4.0 * eta_n * self.node_weight
        return wc, wn

    def viscous_matrix(self, eta_cells) -> sp.csr_matrix:
        """Symmetric M with x^T M x = integral of 2 eta |Dv|^2."""
        wc, wn = self.weights(eta_cells)
        wcd = sp.diags(wc)
        m = self.dudx.T @ wcd @ self.dudx + self.dwdy.T @ wcd @ self.dwdy
        m = m + self.shear.T @ sp.diags(wn) @ self.shear
        return m.tocsr()

    def dissipation(self, u, w, eta_cells) -> float:
        x = self.pack(u, w)
        wc, wn = self.weights(eta_cells)
        d11 = self.dudx @ x
        d22 = self.dwdy @ x
        d12 = self.shear @ x
        return float(np.dot(wc, d11 * d11) + np.dot(wc, d22 * d22) + np.dot(wn, d12 * d12))


@lru_cache(maxsize=16)
def strain_operator(grid: Grid) -> StrainOperator:
    return StrainOperator(grid)


@lru_cache(maxsize=16)
def _poisson_eigs(grid: Grid):
    kx = np.arange(grid.nx)
    ky = np.arange(grid.ny)
    lx = -4.0 / grid.hx**2 * np.sin(np.pi * kx / (2 * grid.nx)) ** 2
    ly = -4.0 / grid.hy**2 * np.sin(np.pi * ky / (2 * grid.ny)) ** 2
    lam = lx[:, None] + ly[None, :]
    lam[0, 0] = 1.0
    return lam


def solve_poisson_neumann(grid: Grid, rhs: np.ndarray) -> np.ndarray:
    """Zero-mean solution of the 5-point Neumann Poisson problem lap p = rhs.

    The DCT-II diagonalizes the cell-centered Neumann Laplacian exactly; the
    mean of ``rhs`` is discarded (compatibility condition).
    """
    lam = _poisson_eigs(grid)
    coef = scipy.fft.dctn(rhs, type=2, norm="ortho")
    coef = coef / lam
    coef[0, 0] = 0.0
    return scipy.fft.idctn(coef, type=2, norm="ortho")

"""Uniform MAC grid on a rectangle, field containers and discrete operators.

Scalars live at cell centers, velocity components on the faces normal to
them.  Homogeneous Neumann conditions for scalars and no-slip for the
velocity are built into the operators, so every operator here telescopes:
area-weighted sums of divergences are exactly the (zero) boundary flux.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("cell counts must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs nx, ny >= 4, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain side lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def shape(self):
        return (self.nx, self.ny)

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def x_faces(self):
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def y_faces(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def nodes(self):
        x = np.arange(self.nx + 1) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.nx * factor, self.ny * factor, self.lx, self.ly)


def _frozen(a, shape, what):
    arr = np.array(a, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell-centered scalar with homogeneous Neumann boundary conditions."""

    grid: Grid
    values: np.ndarray
    name: str = ""
    bc: str = "neumann"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape, "ScalarField"))

    @classmethod
    def zeros(cls, grid, name=""):
        return cls(grid, np.zeros(grid.shape), name)

    @classmethod
    def constant(cls, grid, value, name=""):
        return cls(grid, np.full(grid.shape, float(value)), name)

    @classmethod
    def from_function(cls, grid, func, name=""):
        x, y = grid.cell_centers()
        return cls(grid, np.broadcast_to(func(x, y), grid.shape), name)

    def mean(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_area / self.grid.area)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values, name=None):
        return ScalarField(self.grid, values, self.name if name is None else name)


@dataclass(frozen=True, eq=False)
class MacVelocity:
    """Face-normal velocity components; wall-normal faces are exactly zero."""

    grid: Grid
    u: np.ndarray
    w: np.ndarray
    bc: str = "no-slip"

    def __post_init__(self):
        g = self.grid
        u = _frozen(self.u, (g.nx + 1, g.ny), "MacVelocity.u")
        w = _frozen(self.w, (g.nx, g.ny + 1), "MacVelocity.w")
        if np.any(u[0, :] != 0) or np.any(u[-1, :] != 0) or np.any(w[:, 0] != 0) or np.any(w[:, -1] != 0):
            raise ValueError("MacVelocity: boundary normal components must be zero (no penetration)")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    @classmethod
    def from_functions(cls, grid, fu, fw):
        """Sample components at face centers; wall-normal faces are set to zero."""
        xu, yu = grid.x_faces()
        xw, yw = grid.y_faces()
        u = np.array(np.broadcast_to(fu(xu, yu), xu.shape), dtype=float)
        w = np.array(np.broadcast_to(fw(xw, yw), xw.shape), dtype=float)
        u[0, :] = u[-1, :] = 0.0
        w[:, 0] = w[:, -1] = 0.0
        return cls(grid, u, w)

    @classmethod
    def from_streamfunction(cls, grid, psi):
        """Discretely divergence-free field u = d(psi)/dy, w = -d(psi)/dx.

        ``psi`` is sampled at grid nodes and must vanish on the boundary.
        """
        xn, yn = grid.nodes()
        pn = np.array(np.broadcast_to(psi(xn, yn), xn.shape), dtype=float)
        pn[0, :] = pn[-1, :] = 0.0
        pn[:, 0] = pn[:, -1] = 0.0
        u = (pn[:, 1:] - pn[:, :-1]) / grid.hy
        w = -(pn[1:, :] - pn[:-1, :]) / grid.hx
        return cls(grid, u, w)

    def max_abs(self):
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.w))))


def _same_grid(*objs):
    g = objs[0].grid
    for o in objs[1:]:
        if o.grid != g:
            raise GridMismatchError(f"fields live on different grids: {g} vs {o.grid}")
    return g


def gradient(f: ScalarField) -> MacVelocity:
    """Face-centered gradient; zero normal component on the boundary."""
    g = f.grid
    return MacVelocity(g, kernels.grad_x(f.values, g.hx), kernels.grad_y(f.values, g.hy))


def divergence(v: MacVelocity) -> ScalarField:
    g = v.grid
    return ScalarField(g, kernels.divergence(v.u, v.w, g.hx, g.hy), "div")


def laplacian_neumann(f: ScalarField) -> ScalarField:
    g = f.grid
    return ScalarField(g, kernels.laplacian(f.values, g.hx, g.hy), "lap")


def advect_conservative(v: MacVelocity, f: ScalarField, upwind: bool = False) -> ScalarField:
    """Discrete div(v f) with centered (or upwind) face values of f."""
    g = _same_grid(v, f)
    return ScalarField(g, kernels.advect(v.u, v.w, f.values, g.hx, g.hy, upwind), "adv")


def inner_product(f: ScalarField, g: ScalarField) -> float:
    grid = _same_grid(f, g)
    return float(np.sum(f.values * g.values) * grid.cell_area)


def l2_norm(f: ScalarField) -> float:
    return float(np.sqrt(inner_product(f, f)))


def linf_norm(f: ScalarField) -> float:
    return f.max_abs()


def kinetic_energy(v: MacVelocity) -> float:
    """Half the squared l2 norm with face control volumes hx*hy."""
    g = v.grid
    return 0.5 * float(np.sum(v.u * v.u) + np.sum(v.w * v.w)) * g.cell_area


def face_l2_sq(gx, gy, grid) -> float:
    """Squared l2 norm of a face-valued vector field given as raw arrays."""
    return float(np.sum(gx * gx) + np.sum(gy * gy)) * grid.cell_area


def restrict(values: np.ndarray) -> np.ndarray:
    """2x2 cell averaging from a grid onto the grid with half the resolution."""
    nx, ny = values.shape
    return 0.25 * (values[0::2, 0::2] + values[1::2, 0::2] + values[0::2, 1::2] + values[1::2, 1::2])

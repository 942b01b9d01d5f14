# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels; same contract and operation order as _pykernels."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def grad_x(const double[:, ::1] f, double hx):
    cdef Py_ssize_t nx = f.shape[0], ny = f.shape[1], i, j
    out = np.zeros((nx + 1, ny))
    cdef double[:, ::1] g = out
    for i in range(1, nx):
        for j in range(ny):
            g[i, j] = (f[i, j] - f[i - 1, j]) / hx
    return out


def grad_y(const double[:, ::1] f, double hy):
    cdef Py_ssize_t nx = f.shape[0], ny = f.shape[1], i, j
    out = np.zeros((nx, ny + 1))
    cdef double[:, ::1] g = out
    for i in range(nx):
        for j in range(1, ny):
            g[i, j] = (f[i, j] - f[i, j - 1]) / hy
    return out


def divergence(const double[:, ::1] u, const double[:, ::1] w, double hx, double hy):
    cdef Py_ssize_t nx = w.shape[0], ny = u.shape[1], i, j
    out = np.empty((nx, ny))
    cdef double[:, ::1] d = out
    for i in range(nx):
        for j in range(ny):
            d[i, j] = (u[i + 1, j] - u[i, j]) / hx + (w[i, j + 1] - w[i, j]) / hy
    return out


def laplacian(const double[:, ::1] f, double hx, double hy):
    cdef Py_ssize_t nx = f.shape[0], ny = f.shape[1], i, j
    cdef double gxl, gxr, gyl, gyr
    out = np.empty((nx, ny))
    cdef double[:, ::1] d = out
    for i in range(nx):
        for j in range(ny):
            gxl = (f[i, j] - f[i - 1, j]) / hx if i > 0 else 0.0
            gxr = (f[i + 1, j] - f[i, j]) / hx if i < nx - 1 else 0.0
            gyl = (f[i, j] - f[i, j - 1]) / hy if j > 0 else 0.0
            gyr = (f[i, j + 1] - f[i, j]) / hy if j < ny - 1 else 0.0
            d[i, j] = (gxr - gxl) / hx + (gyr - gyl) / hy
    return out


cdef inline double _face(double vel, double left, double right, bint upwind) nogil:
    if upwind:
        return vel * (left if vel > 0.0 else right)
    return vel * (0.5 * (left + right))


def advect(const double[:, ::1] u, const double[:, ::1] w, const double[:, ::1] f,
           double hx, double hy, bint upwind=False):
    cdef Py_ssize_t nx = f.shape[0], ny = f.shape[1], i, j
    cdef double fxl, fxr, fyl, fyr
    out = np.empty((nx, ny))
    cdef double[:, ::1] d = out
    for i in range(nx):
        for j in range(ny):
            fxl = _face(u[i, j], f[i - 1, j], f[i, j], upwind) if i > 0 else 0.0
            fxr = _face(u[i + 1, j], f[i, j], f[i + 1, j], upwind) if i < nx - 1 else 0.0
            fyl = _face(w[i, j], f[i, j - 1], f[i, j], upwind) if j > 0 else 0.0
            fyr = _face(w[i, j + 1], f[i, j], f[i, j + 1], upwind) if j < ny - 1 else 0.0
            d[i, j] = (fxr - fxl) / hx + (fyr - fyl) / hy
    return out


def momentum_convection(const double[:, ::1] u, const double[:, ::1] w, double hx, double hy):
    cdef Py_ssize_t nx = w.shape[0], ny = u.shape[1], i, j
    cdef double a, b
    uw_arr = np.zeros((nx + 1, ny + 1))
    cdef double[:, ::1] uw = uw_arr
    nu_arr = np.zeros((nx + 1, ny))
    nw_arr = np.zeros((nx, ny + 1))
    cdef double[:, ::1] nu = nu_arr
    cdef double[:, ::1] nw = nw_arr
    cdef double ucl, ucr, wcl, wcr
    for i in range(1, nx):
        for j in range(1, ny):
            a = 0.5 * (u[i, j] + u[i, j - 1])
            b = 0.5 * (w[i, j] + w[i - 1, j])
            uw[i, j] = a * b
    for i in range(1, nx):
        for j in range(ny):
            ucl = 0.5 * (u[i, j] + u[i - 1, j])
            ucr = 0.5 * (u[i + 1, j] + u[i, j])
            nu[i, j] = (ucr * ucr - ucl * ucl) / hx + (uw[i, j + 1] - uw[i, j]) / hy
    for i in range(nx):
        for j in range(1, ny):
            wcl = 0.5 * (w[i, j] + w[i, j - 1])
            wcr = 0.5 * (w[i, j + 1] + w[i, j])
            nw[i, j] = (uw[i + 1, j] - uw[i, j]) / hx + (wcr * wcr - wcl * wcl) / hy
    return nu_arr, nw_arr

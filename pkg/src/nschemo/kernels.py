"""Backend selection for the stencil kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is used.  Setting ``NSCHEMO_KERNELS=python`` forces the
fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("NSCHEMO_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _c(a):
    # compiled kernels require C-contiguous float64 buffers
    import numpy as np

    return np.ascontiguousarray(a, dtype=np.float64)


if BACKEND == "cython":

    def grad_x(f, hx):
        return _impl.grad_x(_c(f), hx)

    def grad_y(f, hy):
        return _impl.grad_y(_c(f), hy)

    def divergence(u, w, hx, hy):
        return _impl.divergence(_c(u), _c(w), hx, hy)

    def laplacian(f, hx, hy):
        return _impl.laplacian(_c(f), hx, hy)

    def advect(u, w, f, hx, hy, upwind=False):
        return _impl.advect(_c(u), _c(w), _c(f), hx, hy, upwind)

    def momentum_convection(u, w, hx, hy):
        return _impl.momentum_convection(_c(u), _c(w), hx, hy)

else:
    grad_x = _pykernels.grad_x
    grad_y = _pykernels.grad_y
    divergence = _pykernels.divergence
    laplacian = _pykernels.laplacian
    advect = _pykernels.advect
    momentum_convection = _pykernels.momentum_convection

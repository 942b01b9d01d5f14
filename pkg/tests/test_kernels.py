import importlib

import numpy as np
import pytest

from nschemo import _pykernels, kernels

try:
    ck = importlib.import_module("nschemo._ckernels")
except ImportError:  # extension not built
    ck = None

needs_ext = pytest.mark.skipif(ck is None, reason="compiled kernels not built")


def fields(seed, nx=13, ny=11):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((nx, ny))
    u = rng.standard_normal((nx + 1, ny))
    w = rng.standard_normal((nx, ny + 1))
    u[0] = u[-1] = 0.0
    w[:, 0] = w[:, -1] = 0.0
    return f, u, w


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
@pytest.mark.parametrize("seed", range(5))
def test_compiled_matches_python(seed):
    f, u, w = fields(seed)
    hx, hy = 0.1, 0.07
    np.testing.assert_allclose(ck.grad_x(f, hx), _pykernels.grad_x(f, hx), rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(ck.grad_y(f, hy), _pykernels.grad_y(f, hy), rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(ck.divergence(u, w, hx, hy), _pykernels.divergence(u, w, hx, hy), rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(ck.laplacian(f, hx, hy), _pykernels.laplacian(f, hx, hy), rtol=1e-13, atol=1e-10)
    for up in (False, True):
        np.testing.assert_allclose(
            ck.advect(u, w, f, hx, hy, up), _pykernels.advect(u, w, f, hx, hy, up), rtol=1e-13, atol=1e-11
        )
    a = ck.momentum_convection(u, w, hx, hy)
    b = _pykernels.momentum_convection(u, w, hx, hy)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-11)


@needs_ext
def test_compiled_accepts_readonly_input():
    f, _, _ = fields(1)
    f.flags.writeable = False
    assert ck.laplacian(f, 0.1, 0.1).shape == f.shape


def test_wrapper_accepts_noncontiguous():
    f, _, _ = fields(2)
    ft = np.asfortranarray(f)
    np.testing.assert_allclose(kernels.laplacian(ft, 0.1, 0.2), _pykernels.laplacian(f, 0.1, 0.2), rtol=1e-13, atol=1e-10)


def test_momentum_convection_vanishes_for_zero_flow():
    _, u, w = fields(3)
    nu, nw = _pykernels.momentum_convection(0 * u, 0 * w, 0.1, 0.1)
    assert not np.any(nu) and not np.any(nw)

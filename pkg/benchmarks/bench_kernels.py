"""Time the stencil kernels: compiled extension vs numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 200]

Also times one full coupled step with each backend (the backend is chosen
at import, so that part runs in subprocesses with NSCHEMO_KERNELS set).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nschemo import _pykernels

try:
    from nschemo import _ckernels
except ImportError:
    _ckernels = None

STEP_SNIPPET = """
import time, numpy as np
from nschemo import BACKEND
from nschemo.grid import Grid
from nschemo.stepper import PhysParams, Stepper, StepperConfig, make_state
g = Grid({n}, {n})
prm = PhysParams(B=1e-3, chi=0.5, eta2=2.0)
st = make_state(g, np.random.default_rng(0).uniform(-0.05, 0.05, g.shape), 0.1, None, prm)
s = Stepper(g, prm, StepperConfig(dt=2e-3))
st, _, _ = s.step(st)
t0 = time.perf_counter()
for _ in range({steps}):
    st, _, _ = s.step(st)
print(BACKEND, (time.perf_counter() - t0) / {steps})
"""


def cases(n, rng):
    f = rng.standard_normal((n, n))
    u = rng.standard_normal((n + 1, n))
    w = rng.standard_normal((n, n + 1))
    u[0] = u[-1] = 0.0
    w[:, 0] = w[:, -1] = 0.0
    h = 1.0 / n
    return {
        "grad_x": lambda m: m.grad_x(f, h),
        "divergence": lambda m: m.divergence(u, w, h, h),
        "laplacian": lambda m: m.laplacian(f, h, h),
        "advect_central": lambda m: m.advect(u, w, f, h, h, False),
        "advect_upwind": lambda m: m.advect(u, w, f, h, h, True),
        "momentum_convection": lambda m: m.momentum_convection(u, w, h, h),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--steps", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if _ckernels is None:
        print("compiled kernels not built; only the numpy fallback is timed")
    print(f"{'kernel':<22}{'n':>6}{'numpy [us]':>14}{'cython [us]':>14}{'speedup':>10}")
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            tp = min(timeit.repeat(lambda: fn(_pykernels), number=args.repeat, repeat=3)) / args.repeat
            if _ckernels is not None:
                tc = min(timeit.repeat(lambda: fn(_ckernels), number=args.repeat, repeat=3)) / args.repeat
                print(f"{name:<22}{n:>6}{tp * 1e6:>14.1f}{tc * 1e6:>14.1f}{tp / tc:>10.2f}")
            else:
                print(f"{name:<22}{n:>6}{tp * 1e6:>14.1f}{'-':>14}{'-':>10}")

    print("\nfull coupled step, 64x64")
    for backend in ("python", "cython"):
        env = dict(os.environ, NSCHEMO_KERNELS=backend)
        code = STEP_SNIPPET.format(n=64, steps=args.steps)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, sec = out.stdout.split()
        print(f"  requested {backend:<7} -> {name:<7} {float(sec) * 1e3:8.2f} ms/step")


if __name__ == "__main__":
    main()

"""Compare the numba and numpy time-stepping kernels.

    python benchmarks/bench_kernels.py [--m 32] [--steps 5000]

Both variants are called directly, so the environment flag does not matter.
The first numba call is excluded from the timing (compilation).
"""

import argparse
import math
import time

import numpy as np

from timocat import kernels
from timocat._accel import HAVE_NUMBA
from timocat.dynamics import Layout, NonlinearRHS, linear_operator, rk4_matrix
from timocat.model import BoundarySet, make_default_sigma, validate_params


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--m", type=int, default=32)
    parser.add_argument("--steps", type=int, default=5000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    p = validate_params(dict(rho1=1, rho2=1, rho3=1, b=1, k=1, gamma=1, delta=1, kappa=1, mu=1,
                             tau0=1, L=math.pi))
    law = make_default_sigma(1.0, 1.0)
    layout = Layout(BoundarySet.DIRICHLET_ALL, args.m, p.L)
    A = np.ascontiguousarray(linear_operator(p, layout))
    R = rk4_matrix(A, 1e-3)
    f = NonlinearRHS(p, layout, law)
    s = layout.slices
    y0 = np.random.default_rng(0).standard_normal(layout.size) * 1e-3
    nl_args = (A, np.ascontiguousarray(f._Bx), np.ascontiguousarray(f._Bxx), np.ascontiguousarray(f._proj),
               1.0, 1.0, s["phi"].start, s["phi_t"].start, y0, 1e-3)

    cases = {
        "linear propagate": (lambda impl: impl(R, y0, args.steps, 10),
                             kernels.propagate_linear_numpy, kernels.propagate_linear_numba),
        "nonlinear rk4": (lambda impl: impl(*nl_args, args.steps // 10, 10),
                          kernels.rk4_default_law_numpy, kernels.rk4_default_law_numba),
    }
    print(f"m={args.m} state size={layout.size} numba available={HAVE_NUMBA}")
    for name, (call, np_impl, nb_impl) in cases.items():
        t_np = best_of(lambda: call(np_impl), args.repeat)
        call(nb_impl)
        t_nb = best_of(lambda: call(nb_impl), args.repeat)
        diff = np.max(np.abs(call(np_impl) - call(nb_impl)))
        print(f"{name:18s} numpy {t_np:8.4f}s  numba {t_nb:8.4f}s  speedup {t_np / t_nb:6.2f}x  max diff {diff:.2e}")


if __name__ == "__main__":
    main()

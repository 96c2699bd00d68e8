"""Compare the compiled FFTW kernels with the numpy/scipy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Times one cubic F_N evaluation, one fused step (rotation + implicit solve)
and a full trajectory of 2^10 steps, for the desk-scale grids.
"""
import argparse
import timeit

import numpy as np

from swave import _kernels
from swave.integrator import SchemeConfig, Stepper
from swave.noise import build_noise, sample_path
from swave.nonlinearity import make_cubic, make_plan
from swave.semigroup import rotation
from swave.spectral import build_grid, random_initial_state

CASES = [(1, 100, 1.505), (1, 1024, 1.505), (2, 16, 2.005), (2, 30, 2.005)]


def _best(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_case(dim, n, delta, backend, repeat):
    spec = make_cubic()
    grid = build_grid(dim, n)
    plan = make_plan(grid, spec, backend=backend)
    tr = plan.transform
    poly = np.asarray(spec.poly)
    x0 = random_initial_state(grid, 0)
    u, v = x0.u.coeffs.copy(), np.random.default_rng(0).normal(size=grid.n_modes) * 0.1
    dw = np.zeros(grid.n_modes)
    tau = 2.0**-10
    rot = rotation(grid, tau)
    apply_t = _best(lambda: tr.poly_apply(poly, v), 200, repeat)
    step_t = _best(lambda: tr.poly_step(poly, u, v, dw, rot.cos, rot.sin_over_omega,
                                        rot.omega_sin, tau, 1e-12, 50), 100, repeat)
    stepper = Stepper(spec, plan, SchemeConfig(tau))
    incs = sample_path(build_noise(grid, delta), 1.0, tau, 0).increments
    traj_t = _best(lambda: stepper.run(x0.u.coeffs, x0.v.coeffs, incs), 1, max(1, repeat // 2))
    return plan.m_quad, apply_t, step_t, traj_t


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {_kernels.BACKEND})")
    header = f"{'d':>2} {'N':>5} {'M':>5} {'backend':>8} {'F_N [us]':>10} {'step [us]':>10} " \
             f"{'2^10 steps [s]':>15}"
    print(header)
    print("-" * len(header))
    for dim, n, delta in CASES:
        rows = {}
        for b in backends:
            m, a, s, t = bench_case(dim, n, delta, b, args.repeat)
            rows[b] = (a, s, t)
            print(f"{dim:>2} {n:>5} {m:>5} {b:>8} {a * 1e6:>10.1f} {s * 1e6:>10.1f} {t:>15.3f}")
        if len(rows) == 2:
            ratio = rows["python"][2] / rows["fftw"][2]
            print(f"{'':>22}speedup of fftw over python on the trajectory: {ratio:.2f}x")


if __name__ == "__main__":
    main()

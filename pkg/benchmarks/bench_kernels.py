"""Compare the compiled and pure-Python chain kernels.

    python3 benchmarks/bench_kernels.py [--n 200 1000 5000] [--repeat 5]

Times one single-step attempt of the Bogacki-Shampine chain kernel and a
full integration of the builtin datum to t = 0.5, per backend.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from ftlpde.ftl import integrate
from ftlpde.kernels import available_backends, get_kernels
from ftlpde.model import VelocityModel
from ftlpde.quantile import ic_paper, partition


def bench_attempt(backend, n, repeat):
    k = get_kernels(backend)
    state = partition(ic_paper(), n)
    y = state.chain()
    f0 = np.empty_like(y)
    k.chain_velocities(y, state.ell, 1.0, 1.0, f0)
    y_new = np.empty_like(y)
    f_new = np.empty_like(y)

    def go():
        k.chain_bs23_attempt(y, f0, 1e-3, state.ell, 1.0, 1.0, 1e-6, 1e-9, y_new, f_new)

    number = max(1, 20000 // n)
    return min(timeit.repeat(go, number=number, repeat=repeat)) / number


def bench_integrate(backend, n, repeat):
    model = VelocityModel.lwr()
    state = partition(ic_paper(), n)
    return min(timeit.repeat(lambda: integrate(state, model, 0.5, backend=backend), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[200, 1000, 5000])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'N':>6} {'backend':>8} {'attempt [us]':>13} {'integrate [ms]':>15}")
    for n in args.n:
        base = None
        for b in backends:
            ta = bench_attempt(b, n, args.repeat) * 1e6
            ti = bench_integrate(b, n, args.repeat) * 1e3
            ratio = "" if base is None else f"  (compiled is {ti / base:.1f}x faster)"
            base = ti if base is None else base
            print(f"{n:>6} {b:>8} {ta:>13.1f} {ti:>15.2f}{ratio}")


if __name__ == "__main__":
    main()

"""Time the compiled and numpy kernel backends on training-sized inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the best-of-N time for each backend and the
speed-up of the compiled one.
"""

import argparse
import timeit

import numpy as np

from pideeponet import kernels
from pideeponet.funcgen import gaussian_kernel_1d
from pideeponet.oracle import default_scenario


def cases():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(1280, 128))  # one hidden layer over the 5-point physics stencil
    field = rng.normal(size=(21, 600))
    w = gaussian_kernel_1d(0.2 * 600)
    sc = default_scenario()
    left, right = sc.boundary(sc.upstream), sc.boundary(sc.downstream)
    return {
        "gelu_forward 1280x128": lambda k: k.gelu_forward(z),
        "convolve_rows_reflect 21x600, sigma=120": lambda k: k.convolve_rows_reflect(field, w),
        "godunov_march 21 cells x 599 steps": lambda k: k.godunov_march(
            sc.rho0, sc.T - 1, sc.dt / sc.dx, sc.v_f, sc.rho_m, False, left, right),
    }


def run(repeat=5, number=3):
    names = kernels.available_backends()
    rows = []
    for label, fn in cases().items():
        times = {}
        for name in names:
            mod = kernels.get_backend(name)
            fn(mod)  # warm up
            times[name] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=repeat)) / number
        rows.append((label, times))
    return names, rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names, rows = run(args.repeat)
    print(f"active backend: {kernels.BACKEND}")
    head = f"{'kernel':44s}" + "".join(f"{n + ' ms':>12s}" for n in names)
    if "cython" in names:
        head += f"{'speed-up':>10s}"
    print(head)
    for label, t in rows:
        line = f"{label:44s}" + "".join(f"{1e3 * t[n]:12.3f}" for n in names)
        if "cython" in names:
            line += f"{t['python'] / t['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()

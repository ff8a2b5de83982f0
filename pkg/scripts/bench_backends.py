#!/usr/bin/env python3
"""Benchmark the compiled jet kernels against the pure-numpy fallback.

Times the raw kernels (product / quotient) and a representative end-to-end
workload (full curvature evaluation of the sphere spray), then prints a
side-by-side table.  Run after `python setup.py build_ext --inplace` or an
editable install; without the extension only the pure rows appear.

    python scripts/bench_backends.py [--repeat 5]
"""

import argparse
import time

import numpy as np

import sprayform.jets as jets
from sprayform.jets import tables_for


def backend_modules():
    from sprayform import _jetcore_py

    mods = {"pure": _jetcore_py}
    try:
        from sprayform import _jetcore

        mods["compiled"] = _jetcore
    except ImportError:
        pass
    return mods


def time_kernel(fn, repeat, inner):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_raw(mod, nvars, repeat):
    t = tables_for(nvars)
    rng = np.random.default_rng(1)
    a = rng.normal(size=t.nmon)
    b = rng.normal(size=t.nmon)
    b[0] = 2.0
    mul_t = time_kernel(lambda: mod.mul(a, b, t), repeat, 2000)
    div_t = time_kernel(lambda: mod.div(a, b, t), repeat, 500)
    return mul_t, div_t


def bench_curvature(mod, repeat):
    from sprayform.expr import SprayModel, sample_points
    from sprayform.geometry import curvature_at

    jets._KERNEL = mod
    sphere = SprayModel.from_strings(
        2, ["sin(x1)*cos(x1)*y2^2", "-2*(cos(x1)/sin(x1))*y1*y2"])
    pts = sample_points(2, 20, seed=3, x_box=(0.4, 2.7))
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for p in pts:
            curvature_at(sphere, p)
        best = min(best, (time.perf_counter() - t0) / len(pts))
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    mods = backend_modules()
    print(f"available backends: {', '.join(mods)}\n")
    rows = []
    for name, mod in mods.items():
        for nvars in (4, 6, 8):
            mul_t, div_t = bench_raw(mod, nvars, args.repeat)
            rows.append((name, f"mul nvars={nvars}", mul_t))
            rows.append((name, f"div nvars={nvars}", div_t))
        rows.append((name, "curvature_at (sphere, n=2)", bench_curvature(mod, args.repeat)))

    print(f"{'backend':<10} {'workload':<28} {'time/op':>12}")
    for name, what, t in rows:
        print(f"{name:<10} {what:<28} {t * 1e6:>10.2f}us")

    if "compiled" in mods:
        print("\nspeedups (pure / compiled):")
        by = {(n, w): t for n, w, t in rows}
        for _, w, _ in [r for r in rows if r[0] == "pure"]:
            ratio = by[("pure", w)] / by[("compiled", w)]
            print(f"  {w:<28} {ratio:>6.1f}x")


if __name__ == "__main__":
    main()

"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per kernel and the speedup. Both backends are
checked for identical output before timing.
"""
import argparse
import timeit

import numpy as np

from rayclass import _kernels as py
from rayclass.dataset import grid_points
from rayclass.geometry import default_directions
from rayclass.scene import gen_double_dot_2d, gen_triple_dot_3d

try:
    from rayclass import _ckernels as cy
except ImportError:  # extension not built
    cy = None


def scan_case(scene, M, r, per_axis):
    pts = grid_points(scene.lo, scene.hi, per_axis)
    normals, offsets, ptr, rule = scene.arrays()
    dirs = default_directions(scene.dims, M).directions
    return (pts, dirs, r, normals, offsets, ptr, rule, scene.lo, scene.hi)


def adam_case(n, seed=0):
    rng = np.random.default_rng(seed)
    flat, grad = rng.normal(size=n), rng.normal(size=n)
    m, v = rng.normal(size=n) * 1e-3, rng.random(n) * 1e-6
    return flat, grad, m, v


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    if cy is None:
        print("compiled extension not available; build with `pip install -e .`")
        return

    rows = []
    for label, scene, M, r, grid in [("scan 2D 37x37, M=6, r=60", gen_double_dot_2d(seed=0), 6, 60, 37),
                                     ("scan 2D 37x37, M=12, r=80", gen_double_dot_2d(seed=0), 12, 80, 37),
                                     ("scan 3D 26^3, M=18, r=60", gen_triple_dot_3d(seed=0), 18, 60, 26)]:
        args = scan_case(scene, M, r, grid)
        f_py, t_py = py.scan_first_crossings(*args)
        f_cy, t_cy = cy.scan_first_crossings(*args)
        assert np.array_equal(f_py, f_cy) and np.array_equal(t_py, t_cy), label
        rows.append((label, best(lambda: py.scan_first_crossings(*args), a.repeat),
                     best(lambda: cy.scan_first_crossings(*args), a.repeat)))

    n = 43_000  # parameter count of the default 6-input network
    f1, g1, m1, v1 = adam_case(n)
    f2, g2, m2, v2 = adam_case(n)
    py.adam_update(f1, g1, m1, v1, 0.9, 0.999, 1e-8, 1e-3, 0.5)
    cy.adam_update(f2, g2, m2, v2, 0.9, 0.999, 1e-8, 1e-3, 0.5)
    assert np.array_equal(f1, f2) and np.array_equal(m1, m2) and np.array_equal(v1, v2), "adam"
    fp, gp, mp, vp = adam_case(n)
    fc, gc, mc, vc = adam_case(n)
    rows.append((f"adam update, {n} params",
                 best(lambda: py.adam_update(fp, gp, mp, vp, 0.9, 0.999, 1e-8, 1e-3, 0.5), a.repeat * 20),
                 best(lambda: cy.adam_update(fc, gc, mc, vc, 0.9, 0.999, 1e-8, 1e-3, 0.5), a.repeat * 20)))

    print(f"{'kernel':32s} {'numpy':>12s} {'cython':>12s} {'speedup':>8s}")
    for label, tp, tc in rows:
        print(f"{label:32s} {tp * 1e3:10.3f}ms {tc * 1e3:10.3f}ms {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()

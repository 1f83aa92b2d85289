import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rayclass import _backend, _kernels as npk
from rayclass.dataset import grid_points
from rayclass.geometry import default_directions
from rayclass.scene import gen_double_dot_2d, gen_triple_dot_3d, single_cell_scene, square_scene

ck = pytest.importorskip("rayclass._ckernels", reason="compiled extension not built")

SCENES = [gen_double_dot_2d(seed=3), gen_triple_dot_3d(seed=3), square_scene(25), single_cell_scene()]


def test_backend_selected():
    assert _backend.NAME == "cython"


def test_pure_python_switch():
    code = "from rayclass import _backend; print(_backend.NAME)"
    env = dict(os.environ, RAYCLASS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.parametrize("scene", SCENES, ids=lambda s: s.kind)
def test_cell_codes_bitwise_equal(scene):
    pts = np.random.default_rng(0).uniform(scene.lo, scene.hi, size=(5000, scene.dims))
    args = scene.arrays()
    a = npk.cell_codes(pts, *args)
    b = ck.cell_codes(pts, *args)
    assert np.array_equal(a, b)
    assert a.tolist()[:200] == [scene.cell_id(p) for p in pts[:200]]


@pytest.mark.parametrize("scene", SCENES, ids=lambda s: s.kind)
@pytest.mark.parametrize("M,r", [(1, 1), (5, 37), (12, 80)])
def test_scan_bitwise_equal(scene, M, r):
    pts = grid_points(scene.lo, scene.hi, 13 if scene.dims == 2 else 7)
    args = (pts, default_directions(scene.dims, M, 0.2).directions, r, *scene.arrays(), scene.lo, scene.hi)
    f1, t1 = npk.scan_first_crossings(*args)
    f2, t2 = ck.scan_first_crossings(*args)
    assert np.array_equal(f1, f2) and np.array_equal(np.asarray(t1, bool), np.asarray(t2, bool))


def test_points_on_lines_agree():
    sc = gen_double_dot_2d(seed=1)
    L = sc.families[0]
    t = np.linspace(-200, 200, 101)
    along = np.array([-L.normal[1], L.normal[0]])
    pts = L.offsets[2] * L.normal + t[:, None] * along
    pts = pts[np.all((pts >= 0) & (pts <= 300), axis=1)]
    args = sc.arrays()
    assert np.array_equal(npk.cell_codes(pts, *args), ck.cell_codes(pts, *args))
    assert npk.cell_codes(pts, *args).tolist() == [sc.cell_id(p) for p in pts]


@given(st.integers(0, 2**31 - 1), st.integers(1, 300), st.floats(0.0, 1e-2))
def test_adam_bitwise_equal(seed, step, lr):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 300))
    flat, grad = rng.normal(size=n), rng.normal(size=n)
    grad[rng.random(n) < 0.3] = 0.0
    m = rng.normal(size=n) * 10.0 ** rng.integers(-320, 0, size=n)
    v = rng.random(n) * 1e-4
    c2 = 1 - 0.999 ** step
    ss = lr / (1 - 0.9 ** step)
    a = [x.copy() for x in (flat, grad, m, v)]
    b = [x.copy() for x in (flat, grad, m, v)]
    npk.adam_update(*a, 0.9, 0.999, 1e-8, ss, c2)
    ck.adam_update(*b, 0.9, 0.999, 1e-8, ss, c2)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_adam_flushes_tiny_moments():
    m = np.array([1e-310, -1e-305, 1e-200])
    for k in (npk, ck):
        mm = m.copy()
        k.adam_update(np.zeros(3), np.zeros(3), mm, np.zeros(3), 0.9, 0.999, 1e-8, 1e-3, 0.5)
        assert mm[0] == 0 and mm[1] == 0 and mm[2] == 0.9e-200

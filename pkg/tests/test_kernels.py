import math
import os
import pickle
import subprocess
import sys

import numpy as np
import pytest

from swave import _kernels
from swave.nonlinearity import dense_sine_matrix
from swave.semigroup import rotation
from swave.spectral import build_grid

CUBIC = np.array([0.0, 1.0, 0.0, -1.0])


def _pair(dim, n, m):
    return [_kernels.transform_class(b)(dim, n, m) for b in _kernels.available_backends()]


def test_compiled_backend_present():
    # the build links FFTW; a missing extension silently degrades to python
    assert "python" in _kernels.available_backends()
    assert _kernels.BACKEND in _kernels.available_backends()


def test_env_forces_python():
    code = "from swave import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, SWAVE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("dim, n, m", [(1, 3, 3), (1, 17, 63), (2, 4, 15), (2, 5, 31)])
def test_synthesize_matches_dense(backend, rng, dim, n, m):
    tr = _kernels.transform_class(backend)(dim, n, m)
    s = dense_sine_matrix(n, m)
    c = rng.normal(size=n**dim)
    expected = s @ c if dim == 1 else (s @ c.reshape(n, n) @ s.T).ravel()
    np.testing.assert_allclose(tr.synthesize(c), expected, atol=1e-12)
    vals = rng.normal(size=m**dim)
    # analysis is (M+1)^-d S^T values, truncated
    scale = (1.0 / (m + 1)) ** dim
    ref = s.T @ vals if dim == 1 else (s.T @ vals.reshape(m, m) @ s).ravel()
    np.testing.assert_allclose(tr.analyze(vals), scale * ref, atol=1e-12)


@pytest.mark.parametrize("dim, n, m", [(1, 20, 63), (2, 6, 31)])
def test_backends_agree(rng, dim, n, m):
    trs = _pair(dim, n, m)
    if len(trs) < 2:
        pytest.skip("compiled backend not built")
    v, w, dw = (rng.normal(size=n**dim) * 0.1 for _ in range(3))
    a, b = trs
    np.testing.assert_allclose(a.poly_apply(CUBIC, v), b.poly_apply(CUBIC, v), atol=1e-13)
    dp = np.array([1.0, 0.0, -3.0])
    np.testing.assert_allclose(a.poly_jvp(dp, v, w), b.poly_jvp(dp, v, w), atol=1e-13)
    grid = build_grid(dim, n)
    rot = rotation(grid, 2.0**-6)
    u = w / grid.eigenvalues
    args = (CUBIC, u, v, dw, rot.cos, rot.sin_over_omega, rot.omega_sin, 2.0**-6, 1e-12, 50)
    ra, rb = a.poly_step(*args), b.poly_step(*args)
    for xa, xb in zip(ra[:3], rb[:3]):
        np.testing.assert_allclose(xa, xb, atol=1e-13)
    assert ra[5] == rb[5] == _kernels.CONVERGED


def test_poly_solve_linear(backend):
    tr = _kernels.transform_class(backend)(1, 4, 7)
    y = np.array([1.0, -2.0, 0.5, 3.0])
    v, iters, inc, status = tr.poly_solve(np.array([0.0, 1.0]), y, 0.1, 1e-13, 60)
    assert status == _kernels.CONVERGED
    np.testing.assert_allclose(v, y / 0.9, rtol=1e-12)
    assert iters == pytest.approx(math.log(1e-13) / math.log(0.1), abs=2)


def test_fixed_point_statuses():
    y = np.ones(3)
    assert _kernels.fixed_point(lambda x: 0 * x, y, 0.5, 1e-12, 10)[3] == _kernels.CONVERGED
    assert _kernels.fixed_point(lambda x: 3 * x, y, 1.0, 1e-12, 50)[3] == _kernels.STALLED
    assert _kernels.fixed_point(lambda x: 0.5 * x, y, 1.0, 1e-12, 3)[3] == _kernels.MAX_ITER
    inf = _kernels.fixed_point(lambda x: x * np.inf, y, 1.0, 1e-12, 5)
    assert inf[3] == _kernels.NONFINITE


def test_fixed_point_stall_in_compiled(backend):
    tr = _kernels.transform_class(backend)(1, 1, 3)
    # a = 6 + (a - 1.5 a^3)/6 is not a contraction near the root
    out = tr.poly_solve(CUBIC, np.array([6.0]), 1 / 6, 1e-12, 50)
    assert out[3] in (_kernels.STALLED, _kernels.NONFINITE, _kernels.MAX_ITER)


def test_transforms_pickle(backend, rng):
    tr = _kernels.transform_class(backend)(2, 3, 7)
    clone = pickle.loads(pickle.dumps(tr))
    c = rng.normal(size=9)
    np.testing.assert_array_equal(clone.synthesize(c), tr.synthesize(c))


def test_bad_sizes(backend):
    cls = _kernels.transform_class(backend)
    with pytest.raises(ValueError):
        cls(1, 8, 4)
    with pytest.raises(ValueError):
        cls(3, 2, 4)

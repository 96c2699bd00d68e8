"""Pure numpy/scipy implementation of the collocation kernels.

Mirrors ``_fftw_core.SineTransform`` call for call. Used when the compiled
extension is unavailable or ``SWAVE_PURE_PYTHON=1``.
"""
import math

import numpy as np
from scipy import fft as sfft

# solver status codes shared with the compiled core
CONVERGED, STALLED, MAX_ITER, NONFINITE = 0, 1, 2, 3


def _horner(poly, x):
    out = np.full_like(x, poly[-1])
    for a in poly[-2::-1]:
        out *= x
        out += a
    return out


class SineTransform:
    """DST-I collocation on M^dim interior nodes i/(M+1), coefficients on N^dim modes."""

    def __init__(self, dim, n, m):
        if dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if m < n:
            raise ValueError("collocation size must be >= mode count per axis")
        self.dim, self.n, self.m = int(dim), int(n), int(m)
        self._synth_scale = 2.0 ** (-self.dim / 2.0)
        self._anal_scale = (1.0 / (math.sqrt(2.0) * (self.m + 1))) ** self.dim

    def synthesize(self, coeffs):
        n, m = self.n, self.m
        c = np.asarray(coeffs, dtype=np.float64)
        if self.dim == 1:
            buf = np.zeros(m)
            buf[:n] = c
            out = sfft.dst(buf, type=1)
        else:
            buf = np.zeros((n, m))
            buf[:, :n] = c.reshape(n, n)
            # only the first n rows are nonzero before the column pass
            rows = sfft.dst(buf, type=1, axis=1)
            full = np.zeros((m, m))
            full[:n] = rows
            out = sfft.dst(full, type=1, axis=0)
        return out.ravel() * self._synth_scale

    def analyze(self, values):
        n, m = self.n, self.m
        a = np.asarray(values, dtype=np.float64)
        if self.dim == 1:
            out = sfft.dst(a, type=1)[:n]
        else:
            cols = sfft.dst(a.reshape(m, m), type=1, axis=0)[:n]
            out = sfft.dst(cols, type=1, axis=1)[:, :n]
        return np.ascontiguousarray(out).ravel() * self._anal_scale

    def poly_apply(self, poly, v):
        return self.analyze(_horner(poly, self.synthesize(v)))

    def poly_jvp(self, dpoly, v, w):
        return self.analyze(_horner(dpoly, self.synthesize(v)) * self.synthesize(w))

    def poly_solve(self, poly, y, tau, tol, max_iter):
        return fixed_point(lambda x: self.poly_apply(poly, x), y, tau, tol, max_iter)

    def poly_step(self, poly, u, v, dw, cos, sin_over_omega, omega_sin, tau, tol, max_iter):
        w = v + dw
        yu = cos * u + sin_over_omega * w
        yv = cos * w - omega_sin * u
        v1, iters, inc, status = self.poly_solve(poly, yv, tau, tol, max_iter)
        return yu, yv, v1, iters, inc, status


def fixed_point(apply_f, y, tau, tol, max_iter):
    """Iterate v <- y + tau F(v) from v = y.

    Returns ``(v, iterations, last_increment, status)``. Stops with STALLED
    once the increment fails to shrink by 0.9 for 5 consecutive iterations.
    """
    v = np.array(y, dtype=np.float64, copy=True)
    prev = math.inf
    bad = 0
    d = math.inf
    for k in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            vn = y + tau * apply_f(v)
        diff = vn - v
        d = math.sqrt(float(np.dot(diff, diff)))
        nv = math.sqrt(float(np.dot(vn, vn)))
        v = vn
        if not (math.isfinite(d) and math.isfinite(nv)):
            return v, k, d, NONFINITE
        if d <= tol * (1.0 + nv):
            return v, k, d, CONVERGED
        bad = bad + 1 if d > 0.9 * prev else 0
        if bad >= 5:
            return v, k, d, STALLED
        prev = d
    return v, max_iter, d, MAX_ITER

# cython: language_level=3
"""FFTW-backed collocation kernels.

Same contract as ``_pykernels.SineTransform``.  Every hot routine runs
without the GIL on buffers owned by the instance, so one instance per
thread is safe; sharing an instance between threads is not.

Plans use FFTW_ESTIMATE so the chosen algorithm, and therefore the
rounding, is identical from run to run.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, isfinite, INFINITY

cnp.import_array()

cdef extern from "fftw3.h" nogil:
    ctypedef struct fftw_plan_s:
        pass
    ctypedef fftw_plan_s *fftw_plan
    ctypedef int fftw_r2r_kind
    int FFTW_RODFT00
    unsigned FFTW_ESTIMATE
    fftw_plan fftw_plan_many_r2r(int rank, const int *n, int howmany,
                                 double *inp, const int *inembed, int istride, int idist,
                                 double *out, const int *onembed, int ostride, int odist,
                                 const fftw_r2r_kind *kind, unsigned flags)
    void fftw_execute(const fftw_plan p)
    void fftw_destroy_plan(fftw_plan p)
    void *fftw_malloc(size_t n)
    void fftw_free(void *p)

DEF CONVERGED = 0
DEF STALLED = 1
DEF MAX_ITER = 2
DEF NONFINITE = 3


cdef class SineTransform:
    cdef readonly int dim, n, m
    cdef Py_ssize_t n_modes, n_nodes
    cdef double synth_scale, anal_scale
    cdef double *buf   # point values; for dim == 2 stored transposed, buf[x2 * m + x1]
    cdef double *aux   # half-transformed scratch (dim == 2)
    cdef double *tmp   # second set of point values (Jacobian products)
    cdef double *work
    cdef fftw_plan plan_buf  # all rows of buf (the single row when dim == 1)
    cdef fftw_plan plan_aux  # first n rows of aux, dim == 2 only

    def __cinit__(self, int dim, int n, int m):
        if dim != 1 and dim != 2:
            raise ValueError("dim must be 1 or 2")
        if m < n:
            raise ValueError("collocation size must be >= mode count per axis")
        self.dim, self.n, self.m = dim, n, m
        self.n_modes = n if dim == 1 else n * n
        self.n_nodes = m if dim == 1 else m * m
        self.synth_scale = pow(2.0, -dim / 2.0)
        self.anal_scale = pow(1.0 / (sqrt(2.0) * (m + 1)), dim)
        self.buf = <double *> fftw_malloc(self.n_nodes * sizeof(double))
        self.aux = <double *> fftw_malloc(self.n_nodes * sizeof(double))
        self.tmp = <double *> fftw_malloc(self.n_nodes * sizeof(double))
        self.work = <double *> fftw_malloc(self.n_modes * sizeof(double))
        if not (self.buf and self.aux and self.tmp and self.work):
            raise MemoryError()
        # Separable transforms, always along contiguous rows: a strided
        # column pass is markedly slower once m * m no longer fits in L1.
        # The second axis is reached by a transpose, so 2D point values live
        # transposed in buf; pointwise maps do not care, and the public
        # synthesize/analyze convert.  Planning is not thread-safe in FFTW;
        # it happens here under the GIL.
        cdef int size = m
        cdef fftw_r2r_kind kind = FFTW_RODFT00
        self.plan_buf = fftw_plan_many_r2r(1, &size, 1 if dim == 1 else m, self.buf, NULL, 1, m,
                                           self.buf, NULL, 1, m, &kind, FFTW_ESTIMATE)
        self.plan_aux = NULL
        if dim == 2:
            self.plan_aux = fftw_plan_many_r2r(1, &size, n, self.aux, NULL, 1, m,
                                               self.aux, NULL, 1, m, &kind, FFTW_ESTIMATE)
            if self.plan_aux == NULL:
                raise RuntimeError("FFTW planning failed")
        if self.plan_buf == NULL:
            raise RuntimeError("FFTW planning failed")

    def __dealloc__(self):
        if self.plan_buf != NULL:
            fftw_destroy_plan(self.plan_buf)
        if self.plan_aux != NULL:
            fftw_destroy_plan(self.plan_aux)
        fftw_free(self.buf)
        fftw_free(self.aux)
        fftw_free(self.tmp)
        fftw_free(self.work)

    def __reduce__(self):
        return (SineTransform, (self.dim, self.n, self.m))

    # ---- nogil building blocks -------------------------------------------

    cdef void _synth(self, const double *c) noexcept nogil:
        """buf <- point values of the coefficient vector c (transposed when dim == 2)."""
        cdef Py_ssize_t i, j, n = self.n, m = self.m
        if self.dim == 1:
            for i in range(n):
                self.buf[i] = c[i]
            for i in range(n, m):
                self.buf[i] = 0.0
            fftw_execute(self.plan_buf)
        else:
            for i in range(n):
                for j in range(n):
                    self.aux[i * m + j] = c[i * n + j]
                for j in range(n, m):
                    self.aux[i * m + j] = 0.0
            fftw_execute(self.plan_aux)
            for j in range(m):
                for i in range(n):
                    self.buf[j * m + i] = self.aux[i * m + j]
                for i in range(n, m):
                    self.buf[j * m + i] = 0.0
            fftw_execute(self.plan_buf)
        for i in range(self.n_nodes):
            self.buf[i] *= self.synth_scale

    cdef void _analyze(self, double *c) noexcept nogil:
        """c <- retained coefficients of the point values held in buf (clobbers buf)."""
        cdef Py_ssize_t i, j, n = self.n, m = self.m
        fftw_execute(self.plan_buf)
        if self.dim == 1:
            for i in range(n):
                c[i] = self.buf[i] * self.anal_scale
        else:
            for i in range(n):
                for j in range(m):
                    self.aux[i * m + j] = self.buf[j * m + i]
            fftw_execute(self.plan_aux)
            for i in range(n):
                for j in range(n):
                    c[i * n + j] = self.aux[i * m + j] * self.anal_scale

    cdef void _load_values(self, const double *a) noexcept nogil:
        cdef Py_ssize_t i, j, m = self.m
        if self.dim == 1:
            for i in range(m):
                self.buf[i] = a[i]
        else:
            for i in range(m):
                for j in range(m):
                    self.buf[j * m + i] = a[i * m + j]

    cdef void _store_values(self, double *a) noexcept nogil:
        cdef Py_ssize_t i, j, m = self.m
        if self.dim == 1:
            for i in range(m):
                a[i] = self.buf[i]
        else:
            for i in range(m):
                for j in range(m):
                    a[i * m + j] = self.buf[j * m + i]

    cdef void _poly_apply(self, const double *poly, int npoly, const double *v,
                          double *out) noexcept nogil:
        cdef Py_ssize_t i
        cdef int k
        cdef double x, acc
        self._synth(v)
        for i in range(self.n_nodes):
            x = self.buf[i]
            acc = poly[npoly - 1]
            for k in range(npoly - 2, -1, -1):
                acc = acc * x + poly[k]
            self.buf[i] = acc
        self._analyze(out)

    cdef int _fixed_point(self, const double *poly, int npoly, const double *y, double tau,
                          double tol, int max_iter, double *v, int *iters,
                          double *inc) noexcept nogil:
        cdef Py_ssize_t i, nm = self.n_modes
        cdef double *fv = self.work
        cdef double d = INFINITY, prev = INFINITY, nv, vn, diff
        cdef int k, bad = 0
        for i in range(nm):
            v[i] = y[i]
        for k in range(1, max_iter + 1):
            self._poly_apply(poly, npoly, v, fv)
            d = 0.0
            nv = 0.0
            for i in range(nm):
                vn = y[i] + tau * fv[i]
                diff = vn - v[i]
                d += diff * diff
                nv += vn * vn
                v[i] = vn
            d = sqrt(d)
            nv = sqrt(nv)
            iters[0] = k
            inc[0] = d
            if not (isfinite(d) and isfinite(nv)):
                return NONFINITE
            if d <= tol * (1.0 + nv):
                return CONVERGED
            if d > 0.9 * prev:
                bad += 1
            else:
                bad = 0
            if bad >= 5:
                return STALLED
            prev = d
        return MAX_ITER

    # ---- Python API ------------------------------------------------------

    def synthesize(self, coeffs):
        cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=np.float64).ravel()
        if c.shape[0] != self.n_modes:
            raise ValueError("coefficient length does not match transform")
        out = np.empty(self.n_nodes)
        cdef double[::1] o = out
        cdef Py_ssize_t i
        with nogil:
            self._synth(&c[0])
            self._store_values(&o[0])
        return out

    def analyze(self, values):
        cdef const double[::1] a = np.ascontiguousarray(values, dtype=np.float64).ravel()
        if a.shape[0] != self.n_nodes:
            raise ValueError("value length does not match transform")
        out = np.empty(self.n_modes)
        cdef double[::1] o = out
        cdef Py_ssize_t i
        with nogil:
            self._load_values(&a[0])
            self._analyze(&o[0])
        return out

    def poly_apply(self, poly, v):
        cdef const double[::1] p = np.ascontiguousarray(poly, dtype=np.float64)
        cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
        if vv.shape[0] != self.n_modes:
            raise ValueError("coefficient length does not match transform")
        out = np.empty(self.n_modes)
        cdef double[::1] o = out
        with nogil:
            self._poly_apply(&p[0], <int> p.shape[0], &vv[0], &o[0])
        return out

    def poly_jvp(self, dpoly, v, w):
        """Retained coefficients of f'(v(x)) w(x), with f' given by ``dpoly``."""
        cdef const double[::1] p = np.ascontiguousarray(dpoly, dtype=np.float64)
        cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
        cdef const double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
        if vv.shape[0] != self.n_modes or ww.shape[0] != self.n_modes:
            raise ValueError("coefficient length does not match transform")
        out = np.empty(self.n_modes)
        cdef double[::1] o = out
        cdef Py_ssize_t i
        cdef int k, npoly = <int> p.shape[0]
        cdef double x, acc
        with nogil:
            self._synth(&vv[0])
            for i in range(self.n_nodes):
                x = self.buf[i]
                acc = p[npoly - 1]
                for k in range(npoly - 2, -1, -1):
                    acc = acc * x + p[k]
                self.tmp[i] = acc
            self._synth(&ww[0])
            for i in range(self.n_nodes):
                self.buf[i] *= self.tmp[i]
            self._analyze(&o[0])
        return out

    def poly_solve(self, poly, y, double tau, double tol, int max_iter):
        cdef const double[::1] p = np.ascontiguousarray(poly, dtype=np.float64)
        cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
        if yy.shape[0] != self.n_modes:
            raise ValueError("coefficient length does not match transform")
        out = np.empty(self.n_modes)
        cdef double[::1] o = out
        cdef int iters = 0, status
        cdef double inc = INFINITY
        with nogil:
            status = self._fixed_point(&p[0], <int> p.shape[0], &yy[0], tau, tol, max_iter,
                                       &o[0], &iters, &inc)
        return out, iters, inc, status

    def poly_step(self, poly, u, v, dw, cos, sin_over_omega, omega_sin,
                  double tau, double tol, int max_iter):
        """Fused rotation of (u, v + dw) followed by the implicit velocity solve."""
        cdef const double[::1] p = np.ascontiguousarray(poly, dtype=np.float64)
        cdef const double[::1] uu = u
        cdef const double[::1] vv = v
        cdef const double[::1] ww = dw
        cdef const double[::1] c = cos
        cdef const double[::1] so = sin_over_omega
        cdef const double[::1] os = omega_sin
        cdef Py_ssize_t i, nm = self.n_modes
        if (uu.shape[0] != nm or vv.shape[0] != nm or ww.shape[0] != nm
                or c.shape[0] != nm or so.shape[0] != nm or os.shape[0] != nm):
            raise ValueError("array length does not match transform")
        yu = np.empty(nm)
        yv = np.empty(nm)
        v1 = np.empty(nm)
        cdef double[::1] ou = yu
        cdef double[::1] ov = yv
        cdef double[::1] o1 = v1
        cdef double w
        cdef int iters = 0, status
        cdef double inc = INFINITY
        with nogil:
            for i in range(nm):
                w = vv[i] + ww[i]
                ou[i] = c[i] * uu[i] + so[i] * w
                ov[i] = c[i] * w - os[i] * uu[i]
            status = self._fixed_point(&p[0], <int> p.shape[0], &ov[0], tau, tol, max_iter,
                                       &o1[0], &iters, &inc)
        return yu, yv, v1, iters, inc, status

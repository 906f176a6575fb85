# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same algorithms and signatures as ``_pycore``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, ceil, log2, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

cnp.import_array()

cdef double[7] PADE6
PADE6[:] = [1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0]
cdef double THETA = 0.5
cdef int MAX_SQUARINGS = 60


cdef inline void _matmul(const double* a, const double* b, double* c, int n) noexcept nogil:
    cdef int i, j, k
    cdef double aik
    for i in range(n * n):
        c[i] = 0.0
    for i in range(n):
        for k in range(n):
            aik = a[i * n + k]
            for j in range(n):
                c[i * n + j] += aik * b[k * n + j]


cdef inline void _matmul_bt(const double* a, const double* b, double* c, int n) noexcept nogil:
    # c = a @ b.T
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += a[i * n + k] * b[j * n + k]
            c[i * n + j] = s


cdef int _lu_solve(double* a, double* b, int n) noexcept nogil:
    # Solves a x = b for n right-hand sides in place (b <- x); a is destroyed.
    cdef int i, j, k, p
    cdef double piv, f, t
    for k in range(n):
        p = k
        piv = fabs(a[k * n + k])
        for i in range(k + 1, n):
            if fabs(a[i * n + k]) > piv:
                piv = fabs(a[i * n + k])
                p = i
        if piv == 0.0:
            return -1
        if p != k:
            for j in range(n):
                t = a[k * n + j]; a[k * n + j] = a[p * n + j]; a[p * n + j] = t
                t = b[k * n + j]; b[k * n + j] = b[p * n + j]; b[p * n + j] = t
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            if f != 0.0:
                for j in range(k + 1, n):
                    a[i * n + j] -= f * a[k * n + j]
                for j in range(n):
                    b[i * n + j] -= f * b[k * n + j]
            a[i * n + k] = 0.0
    for k in range(n - 1, -1, -1):
        for j in range(n):
            t = b[k * n + j]
            for i in range(k + 1, n):
                t -= a[k * n + i] * b[i * n + j]
            b[k * n + j] = t / a[k * n + k]
    return 0


cdef int _expm(const double* a, double scale, double* out, int n, double* work) noexcept nogil:
    # out = exp(scale * a); work holds 4 n*n doubles. Returns -1 on overflow/singular.
    cdef double* x = work
    cdef double* xk = work + n * n
    cdef double* den = work + 2 * n * n
    cdef double* tmp = work + 3 * n * n
    cdef int i, j, k, s
    cdef double norm1 = 0.0, col, sign, factor
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += fabs(a[i * n + j])
        if col > norm1:
            norm1 = col
    norm1 *= fabs(scale)
    if not isfinite(norm1):
        return -1
    s = 0
    if norm1 > THETA:
        s = <int>ceil(log2(norm1 / THETA))
    if s > MAX_SQUARINGS:
        return -1
    factor = scale / (<double>(1 << s) if s < 31 else 2.0 ** s)
    for i in range(n * n):
        x[i] = a[i] * factor
        out[i] = 0.0
        den[i] = 0.0
        xk[i] = 0.0
    for i in range(n):
        out[i * n + i] = PADE6[0]
        den[i * n + i] = PADE6[0]
        xk[i * n + i] = 1.0
    sign = 1.0
    for k in range(1, 7):
        _matmul(xk, x, tmp, n)
        memcpy(xk, tmp, n * n * sizeof(double))
        sign = -sign
        for i in range(n * n):
            out[i] += PADE6[k] * xk[i]
            den[i] += sign * PADE6[k] * xk[i]
    if _lu_solve(den, out, n) != 0:
        return -1
    for k in range(s):
        _matmul(out, out, tmp, n)
        memcpy(out, tmp, n * n * sizeof(double))
    for i in range(n * n):
        if not isfinite(out[i]):
            return -1
    return 0


def squarings(double norm1):
    if not isfinite(norm1):
        return -1
    if norm1 <= THETA:
        return 0
    return <int>ceil(log2(norm1 / THETA))


def expm_pade(a):
    """exp(a) by scaling and squaring with a diagonal Pade(6, 6) approximant."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] aa = np.ascontiguousarray(a, dtype=np.float64)
    cdef int n = aa.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((n, n))
    cdef double* work = <double*>malloc(4 * n * n * sizeof(double))
    cdef int rc
    if work == NULL:
        raise MemoryError()
    try:
        rc = _expm(&aa[0, 0], 1.0, &out[0, 0], n, work)
    finally:
        free(work)
    if rc != 0:
        raise OverflowError("matrix exponential overflowed")
    return out


def propagate_midpoint(a_mid, d, v0, double dt, Py_ssize_t stride):
    """Time-ordered covariance propagation; see ``_pycore.propagate_midpoint``."""
    cdef cnp.ndarray[double, ndim=3, mode="c"] A = np.ascontiguousarray(a_mid, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] D = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n_steps = A.shape[0]
    cdef int n = A.shape[1]
    if n_steps % stride:
        raise ValueError("number of steps must be a multiple of the stride")
    cdef cnp.ndarray[double, ndim=3, mode="c"] out = np.empty((n_steps // stride + 1, n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] V = np.array(v0, dtype=np.float64, order="C")
    out[0] = V
    cdef int nn = n * n
    cdef double* buf = <double*>malloc(10 * nn * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* work = buf
    cdef double* h = buf + 4 * nn
    cdef double* m = buf + 5 * nn
    cdef double* t1 = buf + 6 * nn
    cdef double* t2 = buf + 7 * nn
    cdef double* q = buf + 8 * nn
    cdef double* q2 = buf + 9 * nn
    cdef double* v = &V[0, 0]
    cdef Py_ssize_t k
    cdef int i, j, rc = 0
    cdef double s
    try:
        with nogil:
            for k in range(n_steps):
                rc = _expm(&A[k, 0, 0], 0.5 * dt, h, n, work)
                if rc != 0:
                    break
                _matmul(h, h, m, n)
                _matmul(m, v, t1, n)
                _matmul_bt(t1, m, t2, n)
                # Simpson noise integral: dt/6 (D + 4 H D H^T + M D M^T)
                _matmul(h, &D[0, 0], t1, n)
                _matmul_bt(t1, h, q, n)
                _matmul(m, &D[0, 0], t1, n)
                _matmul_bt(t1, m, q2, n)
                for i in range(nn):
                    q[i] = D[i // n, i % n] + 4.0 * q[i] + q2[i]
                for i in range(n):
                    for j in range(i, n):
                        s = 0.5 * (t2[i * n + j] + t2[j * n + i]) + (dt / 6.0) * 0.5 * (q[i * n + j] + q[j * n + i])
                        v[i * n + j] = s
                        v[j * n + i] = s
                if (k + 1) % stride == 0:
                    memcpy(&out[(k + 1) // stride, 0, 0], v, nn * sizeof(double))
    finally:
        free(buf)
    if rc != 0:
        raise OverflowError(f"matrix exponential overflowed at step {k}")
    return out


cdef inline void _rhs(const double* y, const double* c, double* out) noexcept nogil:
    cdef double ar = y[0], ai = y[1], m1r = y[2], m1i = y[3], m2r = y[4], m2i = y[5]
    cdef double q1 = y[6], p1 = y[7], q2 = y[8], p2 = y[9]
    out[0] = -c[3] * ar + c[0] * ai + c[6] * m1i + c[7] * m2i
    out[1] = -c[0] * ar - c[3] * ai - c[6] * m1r - c[7] * m2r
    out[2] = -c[4] * m1r + c[1] * m1i + c[8] * q1 * m1i + c[6] * ai + c[14]
    out[3] = -c[1] * m1r - c[4] * m1i - c[8] * q1 * m1r - c[6] * ar + c[15]
    out[4] = -c[5] * m2r + c[2] * m2i + c[9] * q2 * m2i + c[7] * ai + c[16]
    out[5] = -c[2] * m2r - c[5] * m2i - c[9] * q2 * m2r - c[7] * ar + c[17]
    out[6] = c[10] * p1
    out[7] = -c[10] * q1 - c[12] * p1 - c[8] * (m1r * m1r + m1i * m1i)
    out[8] = c[11] * p2
    out[9] = -c[11] * q2 - c[13] * p2 - c[9] * (m2r * m2r + m2i * m2i)


def mean_field_rhs(y, c):
    cdef cnp.ndarray[double, ndim=1, mode="c"] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] cc = np.ascontiguousarray(c, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] out = np.empty(10)
    _rhs(&yy[0], &cc[0], &out[0])
    return out


def rk4_mean_field(y0, c, double h, Py_ssize_t n_steps):
    """Classical RK4 over ``n_steps`` of size ``h``; returns all ``n_steps + 1`` states."""
    cdef cnp.ndarray[double, ndim=1, mode="c"] cc = np.ascontiguousarray(c, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((n_steps + 1, 10))
    cdef double y[10]
    cdef double k1[10]
    cdef double k2[10]
    cdef double k3[10]
    cdef double k4[10]
    cdef double tmp[10]
    cdef Py_ssize_t k
    cdef int i
    y0a = np.ascontiguousarray(y0, dtype=np.float64)
    for i in range(10):
        y[i] = y0a[i]
        out[0, i] = y[i]
    with nogil:
        for k in range(n_steps):
            _rhs(y, &cc[0], k1)
            for i in range(10):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            _rhs(tmp, &cc[0], k2)
            for i in range(10):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            _rhs(tmp, &cc[0], k3)
            for i in range(10):
                tmp[i] = y[i] + h * k3[i]
            _rhs(tmp, &cc[0], k4)
            for i in range(10):
                y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                out[k + 1, i] = y[i]
    return out

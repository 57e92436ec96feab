# cython: language_level=3
"""Compiled twins of the functions in ``_pykernels``.

Matrices handed to ``fbs_run``/``drs_run`` must be Fortran-ordered
complex128 so they can go straight to BLAS.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs
from libc.stdlib cimport qsort, malloc, free
from scipy.linalg.cython_blas cimport zgemv, ztrsv

cnp.import_array()

BACKEND = "cython"

cdef double ZERO_MAG = 1e-300


cdef int _cmp_desc(const void *a, const void *b) noexcept nogil:
    cdef double da = (<double *>a)[0]
    cdef double db = (<double *>b)[0]
    if da < db:
        return 1
    if da > db:
        return -1
    return 0


cdef inline double _abs2(double complex v) noexcept nogil:
    return v.real * v.real + v.imag * v.imag


cdef inline double _powr(double a, double r) noexcept nogil:
    # exact fast paths for the exponents used in practice
    if r == 2.0:
        return a * a
    if r == 1.0:
        return a
    if r == 4.0:
        return (a * a) * (a * a)
    if r == 0.0:
        return 1.0
    if r == -1.0:
        return 1.0 / a
    return pow(a, r)


cdef void _grad(const double complex *x, double complex *g, Py_ssize_t n,
                Py_ssize_t stride, double p, double q) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a, sp = 0.0, sq = 0.0, cp, cq
    for i in range(n):
        a = sqrt(_abs2(x[i * stride]))
        sp += _powr(a, p)
        sq += _powr(a, q)
    cp = 0.0
    cq = 0.0
    if sp > 0.0:
        cp = pow(<double>n, 2.0 / q - 2.0 / p) * pow(sp, (2.0 - p) / p)
    if sq > 0.0:
        cq = pow(sq, (2.0 - q) / q)
    for i in range(n):
        a = sqrt(_abs2(x[i * stride]))
        if a < ZERO_MAG:
            g[i * stride] = 0.0
        else:
            g[i * stride] = (cp * _powr(a, p - 2.0) - cq * _powr(a, q - 2.0)) * x[i * stride]


cdef double _objective(const double complex *x, Py_ssize_t n, Py_ssize_t stride,
                       double p, double q) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a, sp = 0.0, sq = 0.0
    for i in range(n):
        a = sqrt(_abs2(x[i * stride]))
        sp += _powr(a, p)
        sq += _powr(a, q)
    return pow(<double>n, 2.0 / q - 2.0 / p) * pow(sp, 2.0 / p) - pow(sq, 2.0 / q)


cdef double _l1_threshold(const double *mags, double *work, Py_ssize_t n,
                          double radius) noexcept nogil:
    cdef Py_ssize_t j, m, m_prev
    cdef double total = 0.0, csum = 0.0, theta = 0.0, lower
    for j in range(n):
        total += mags[j]
    if total <= radius:
        return 0.0
    # theta >= (sum of candidates - radius) / #candidates, so entries at or
    # below that level stay inactive; prune them before sorting
    lower = (total - radius) / n
    m_prev = n
    while True:
        m = 0
        csum = 0.0
        for j in range(n):
            if mags[j] > lower:
                work[m] = mags[j]
                csum += mags[j]
                m += 1
        if m == m_prev:
            break
        m_prev = m
        lower = (csum - radius) / m
    qsort(work, m, sizeof(double), _cmp_desc)
    csum = 0.0
    for j in range(m):
        csum += work[j]
        if work[j] * (j + 1) > csum - radius:
            theta = (csum - radius) / (j + 1)
        else:
            break
    return theta


cdef int _project_l1(const double complex *v, double complex *out, Py_ssize_t n,
                     Py_ssize_t stride, double radius) noexcept nogil:
    """out = projection of v onto the l1 ball; out may alias v."""
    cdef double *mags = <double *>malloc(2 * n * sizeof(double))
    if mags == NULL:
        return -1
    cdef Py_ssize_t i
    cdef double theta, a
    for i in range(n):
        mags[i] = sqrt(_abs2(v[i * stride]))
    theta = _l1_threshold(mags, mags + n, n, radius)
    for i in range(n):
        a = mags[i]
        if theta == 0.0:
            out[i * stride] = v[i * stride]
        elif a > theta:
            out[i * stride] = v[i * stride] * ((a - theta) / a)
        else:
            out[i * stride] = 0.0
    free(mags)
    return 0


def objective(x, double p, double q):
    cdef const double complex[::1] xv = np.ascontiguousarray(x, dtype=np.complex128)
    if xv.shape[0] == 0:
        return 0.0
    return _objective(&xv[0], xv.shape[0], 1, p, q)


cdef _as_grid(T):
    """Complex128 view of ``T`` in its own layout (C unless already Fortran)."""
    T = np.asarray(T, dtype=np.complex128)
    if T.ndim != 2:
        raise ValueError("expected a 2-D grid")
    if not (T.flags.c_contiguous or T.flags.f_contiguous):
        T = np.ascontiguousarray(T)
    return T


cdef void _col_sums(const double complex *t, Py_ssize_t n, Py_ssize_t nb, double p, double q,
                    double *sp, double *sq) noexcept nogil:
    # row-major grid: accumulate every column while streaming rows
    cdef Py_ssize_t i, b
    cdef double a
    for b in range(nb):
        sp[b] = 0.0
        sq[b] = 0.0
    for i in range(n):
        for b in range(nb):
            a = sqrt(_abs2(t[i * nb + b]))
            sp[b] += _powr(a, p)
            sq[b] += _powr(a, q)


def objective_cols(T, double p, double q):
    T = _as_grid(T)
    cdef Py_ssize_t b, n = T.shape[0], nb = T.shape[1]
    out = np.zeros(nb)
    cdef double[::1] ov = out
    cdef const double complex[:, ::1] tc
    cdef const double complex[::1, :] tf
    cdef double[::1] sq
    cdef double scale = pow(<double>n, 2.0 / q - 2.0 / p)
    if n == 0 or nb == 0:
        return out
    if T.flags.c_contiguous:
        tc = T
        sq = np.empty(nb)
        with nogil:
            _col_sums(&tc[0, 0], n, nb, p, q, &ov[0], &sq[0])
            for b in range(nb):
                ov[b] = scale * pow(ov[b], 2.0 / p) - pow(sq[b], 2.0 / q)
    else:
        tf = T
        for b in range(nb):
            ov[b] = _objective(&tf[0, b], n, 1, p, q)
    return out


def grad_lplq(x, double p, double q):
    cdef const double complex[::1] xv = np.ascontiguousarray(x, dtype=np.complex128)
    out = np.empty(xv.shape[0], dtype=np.complex128)
    cdef double complex[::1] gv = out
    if xv.shape[0] > 0:
        with nogil:
            _grad(&xv[0], &gv[0], xv.shape[0], 1, p, q)
    return out


def grad_lplq_cols(T, double p, double q):
    T = _as_grid(T)
    cdef Py_ssize_t i, b, n = T.shape[0], nb = T.shape[1]
    cdef const double complex[:, ::1] tc
    cdef const double complex[::1, :] tf
    cdef double complex[:, ::1] gc
    cdef double complex[::1, :] gf
    cdef double[::1] cp, cq
    cdef double a, scale = pow(<double>n, 2.0 / q - 2.0 / p)
    if n == 0 or nb == 0:
        return np.zeros_like(T)
    if T.flags.c_contiguous:
        tc = T
        out = np.empty((n, nb), dtype=np.complex128)
        gc = out
        cp = np.empty(nb)
        cq = np.empty(nb)
        with nogil:
            _col_sums(&tc[0, 0], n, nb, p, q, &cp[0], &cq[0])
            for b in range(nb):
                cp[b] = scale * pow(cp[b], (2.0 - p) / p) if cp[b] > 0.0 else 0.0
                cq[b] = pow(cq[b], (2.0 - q) / q) if cq[b] > 0.0 else 0.0
            for i in range(n):
                for b in range(nb):
                    a = sqrt(_abs2(tc[i, b]))
                    if a < ZERO_MAG:
                        gc[i, b] = 0.0
                    else:
                        gc[i, b] = (cp[b] * _powr(a, p - 2.0) - cq[b] * _powr(a, q - 2.0)) * tc[i, b]
        return out
    tf = T
    out = np.empty((n, nb), dtype=np.complex128, order="F")
    gf = out
    with nogil:
        for b in range(nb):
            _grad(&tf[0, b], &gf[0, b], n, 1, p, q)
    return out


def l1_threshold(mags, double radius):
    cdef const double[::1] mv = np.ascontiguousarray(mags, dtype=np.float64)
    work = np.empty(mv.shape[0])
    cdef double[::1] wv = work
    if mv.shape[0] == 0:
        return 0.0
    return _l1_threshold(&mv[0], &wv[0], mv.shape[0], radius)


def project_l1_ball(v, double radius):
    cdef const double complex[::1] vv = np.ascontiguousarray(v, dtype=np.complex128)
    out = np.empty(vv.shape[0], dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef int rc = 0
    if vv.shape[0] > 0:
        with nogil:
            rc = _project_l1(&vv[0], &ov[0], vv.shape[0], 1, radius)
    if rc != 0:
        raise MemoryError()
    return out


def project_l1_ball_cols(V, double radius):
    V = _as_grid(V)
    cdef Py_ssize_t b, n = V.shape[0], nb = V.shape[1]
    cdef const double complex[:, ::1] vc
    cdef const double complex[::1, :] vf
    cdef double complex[:, ::1] oc
    cdef double complex[::1, :] of
    cdef int rc = 0
    if n == 0 or nb == 0:
        return np.zeros_like(V)
    if V.flags.c_contiguous:
        vc = V
        out = np.empty((n, nb), dtype=np.complex128)
        oc = out
        with nogil:
            for b in range(nb):
                rc |= _project_l1(&vc[0, b], &oc[0, b], n, nb, radius)
    else:
        vf = V
        out = np.empty((n, nb), dtype=np.complex128, order="F")
        of = out
        with nogil:
            for b in range(nb):
                rc |= _project_l1(&vf[0, b], &of[0, b], n, 1, radius)
    if rc != 0:
        raise MemoryError()
    return out


cdef void _affine_project(double complex *w, double complex *out,
                          double complex *A, double complex *U,
                          const double complex *y, double complex *r,
                          int m, int n) noexcept nogil:
    """out = w - A^H (U^H U)^{-1} (A w - y); out may alias w."""
    cdef int one = 1, i
    cdef double complex alpha = 1.0, beta = 0.0, malpha = -1.0
    cdef char *tn = b"N"
    cdef char *tc = b"C"
    cdef char *up = b"U"
    zgemv(tn, &m, &n, &alpha, A, &m, w, &one, &beta, r, &one)
    for i in range(m):
        r[i] = r[i] - y[i]
    ztrsv(up, tc, tn, &m, U, &m, r, &one)
    ztrsv(up, tn, tn, &m, U, &m, r, &one)
    if out != w:
        for i in range(n):
            out[i] = w[i]
    zgemv(tc, &m, &n, &malpha, A, &m, r, &one, &alpha, out, &one)


cdef void _record(double[:, ::1] st, Py_ssize_t k, const double complex *x,
                  Py_ssize_t n, double p, double q) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a2, a, mx = 0.0, s2 = 0.0, sp = 0.0, sq = 0.0
    for i in range(n):
        a2 = _abs2(x[i])
        a = sqrt(a2)
        if a2 > mx:
            mx = a2
        s2 += a2
        sp += _powr(a, p)
        sq += _powr(a, q)
    st[k, 0] = mx
    st[k, 1] = s2
    st[k, 2] = pow(sp, 2.0 / p)
    st[k, 3] = pow(sq, 2.0 / q)


def affine_project(z, A, U, y):
    cdef const double complex[::1, :] av = np.asfortranarray(A, dtype=np.complex128)
    cdef const double complex[::1, :] uv = np.asfortranarray(U, dtype=np.complex128)
    cdef const double complex[::1] yv = np.ascontiguousarray(y, dtype=np.complex128)
    out = np.array(z, dtype=np.complex128, copy=True)
    cdef double complex[::1] ov = out
    cdef int m = av.shape[0], n = av.shape[1]
    r = np.empty(m, dtype=np.complex128)
    cdef double complex[::1] rv = r
    with nogil:
        _affine_project(&ov[0], &ov[0], <double complex *>&av[0, 0], <double complex *>&uv[0, 0], &yv[0], &rv[0], m, n)
    return out


def fbs_run(x, A, U, y, double p, double q, double tau, Py_ssize_t n_iter, stats=None):
    cdef const double complex[::1, :] av = np.asfortranarray(A, dtype=np.complex128)
    cdef const double complex[::1, :] uv = np.asfortranarray(U, dtype=np.complex128)
    cdef const double complex[::1] yv = np.ascontiguousarray(y, dtype=np.complex128)
    out = np.array(x, dtype=np.complex128, copy=True)
    cdef double complex[::1] xv = out
    cdef int m = av.shape[0], n = av.shape[1]
    cdef double complex[::1] gv = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] rv = np.empty(m, dtype=np.complex128)
    cdef double[:, ::1] st
    cdef bint rec = stats is not None
    if rec:
        st = stats
    cdef Py_ssize_t k, i
    with nogil:
        for k in range(n_iter):
            _grad(&xv[0], &gv[0], n, 1, p, q)
            for i in range(n):
                xv[i] = xv[i] - tau * gv[i]
            _affine_project(&xv[0], &xv[0], <double complex *>&av[0, 0], <double complex *>&uv[0, 0], &yv[0], &rv[0], m, n)
            if rec:
                _record(st, k, &xv[0], n, p, q)
    return out


def drs_run(x, z, A, U, y, double gamma, double p, double q, Py_ssize_t n_iter, stats=None):
    cdef const double complex[::1, :] av = np.asfortranarray(A, dtype=np.complex128)
    cdef const double complex[::1, :] uv = np.asfortranarray(U, dtype=np.complex128)
    cdef const double complex[::1] yv = np.ascontiguousarray(y, dtype=np.complex128)
    xo = np.array(x, dtype=np.complex128, copy=True)
    zo = np.array(z, dtype=np.complex128, copy=True)
    cdef double complex[::1] xv = xo
    cdef double complex[::1] zv = zo
    cdef int m = av.shape[0], n = av.shape[1]
    cdef double complex[::1] tv = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] pv = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] rv = np.empty(m, dtype=np.complex128)
    cdef double[:, ::1] st
    cdef bint rec = stats is not None
    if rec:
        st = stats
    cdef Py_ssize_t k, i
    cdef int rc = 0
    with nogil:
        for k in range(n_iter):
            for i in range(n):
                tv[i] = 2.0 * xv[i] - zv[i]
            rc = _project_l1(&tv[0], &pv[0], n, 1, gamma)
            if rc != 0:
                break
            # z <- z + prox(t) - x with prox(t) = t - P_l1(t)
            for i in range(n):
                zv[i] = zv[i] + (tv[i] - pv[i]) - xv[i]
            _affine_project(&zv[0], &xv[0], <double complex *>&av[0, 0], <double complex *>&uv[0, 0], &yv[0], &rv[0], m, n)
            if rec:
                _record(st, k, &xv[0], n, p, q)
    if rc != 0:
        raise MemoryError()
    return xo, zo

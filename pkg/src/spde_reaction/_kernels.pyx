# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Bessel J0, the psi integrand quadrature, compensated
estimator sums and squared triple increments.

Mirrors ``_kernels_py``; see that module for the contracts.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, pow, expm1, M_PI, INFINITY

cnp.import_array()

BACKEND = "cython"

DEF SERIES_MAX_ARG = 12.0
DEF SERIES_TOL = 1e-18
DEF EPS = 2.220446049250313e-16
# absolute accuracy of the psi integrand per unit length, relative to its
# envelope (8/pi) x^{-1-2 alpha}
DEF FLOOR = 2.5464790894703255e-12

cdef double[8] XGK = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
]
cdef double[8] WGK = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
]
cdef double[4] WG = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
]


cdef inline double _j0_series(double x) nogil:
    cdef double q = -0.25 * x * x
    cdef double term = 1.0
    cdef double total = 1.0
    cdef int k = 1
    while True:
        term = term * q / (k * k)
        total += term
        if fabs(term) < SERIES_TOL:
            return total
        k += 1


cdef inline double _j0_hankel(double x) nogil:
    cdef double p = 1.0
    cdef double q = 0.0
    cdef double coeff = 1.0
    cdef double prev = INFINITY
    cdef double mag, sign, chi
    cdef int k
    for k in range(1, 60):
        coeff = coeff * (-((2 * k - 1) * (2 * k - 1)) / (k * 8.0)) / x
        mag = fabs(coeff)
        if mag >= prev:
            break
        prev = mag
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * coeff
        else:
            q += sign * coeff
    chi = x - 0.25 * M_PI
    return sqrt(2.0 / (M_PI * x)) * (p * cos(chi) - q * sin(chi))


cdef inline double _j0(double x) nogil:
    x = fabs(x)
    if x <= SERIES_MAX_ARG:
        return _j0_series(x)
    return _j0_hankel(x)


cdef inline double _second_difference(double u) nogil:
    cdef double q, term, total, pw
    cdef int k
    u = fabs(u)
    if u <= 2.0:
        q = -0.25 * u * u
        term = 1.0
        total = 0.0
        pw = 1.0
        k = 1
        while True:
            term = term * q / (k * k)
            pw *= 2.0
            if k >= 2:
                total += (pw - 2.0) * term
                if fabs(term) * pw < SERIES_TOL:
                    break
            k += 1
        return total
    return _j0(sqrt(2.0) * u) - 2.0 * _j0(u) + 1.0


cdef inline double _integrand(double x, double r, double alpha) nogil:
    return (2.0 / M_PI) * (-expm1(-x * x)) * pow(x, -1.0 - 2.0 * alpha) * _second_difference(r * x)


def bessel_j0(double x):
    return _j0(x)


def bessel_j0_array(x):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _j0(flat[i])
    return out.reshape(np.shape(x))


def bessel_second_difference(u):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _second_difference(flat[i])
    return out.reshape(np.shape(u))


def psi_integrand(x, double r, double alpha):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _integrand(flat[i], r, alpha)
    return out.reshape(np.shape(x))


cdef void _gk15(double a, double b, double r, double alpha,
                double* result, double* error) nogil:
    cdef double half = 0.5 * (b - a)
    cdef double mid = 0.5 * (b + a)
    cdef double fc = _integrand(mid, r, alpha)
    cdef double k15 = WGK[7] * fc
    cdef double g7 = WG[3] * fc
    cdef double dx, f1, f2
    cdef int j
    for j in range(7):
        dx = half * XGK[j]
        f1 = _integrand(mid - dx, r, alpha)
        f2 = _integrand(mid + dx, r, alpha)
        k15 += WGK[j] * (f1 + f2)
        if j % 2 == 1:
            g7 += WG[j // 2] * (f1 + f2)
    result[0] = k15 * half
    error[0] = fabs((k15 - g7) * half)


cdef void _adaptive(double a, double b, double r, double alpha, double tol,
                    int depth, int max_depth, double* total, double* comp,
                    double* err_total, long* count) nogil:
    cdef double val, err, y, t, local_tol, m
    _gk15(a, b, r, alpha, &val, &err)
    count[0] += 1
    local_tol = tol
    if local_tol < 50.0 * EPS * fabs(val):
        local_tol = 50.0 * EPS * fabs(val)
    if local_tol < FLOOR * (b - a) * pow(a, -1.0 - 2.0 * alpha):
        local_tol = FLOOR * (b - a) * pow(a, -1.0 - 2.0 * alpha)
    if err <= local_tol or depth >= max_depth:
        y = val - comp[0]
        t = total[0] + y
        comp[0] = (t - total[0]) - y
        total[0] = t
        err_total[0] += err
        return
    m = 0.5 * (a + b)
    _adaptive(a, m, r, alpha, 0.5 * tol, depth + 1, max_depth, total, comp, err_total, count)
    _adaptive(m, b, r, alpha, 0.5 * tol, depth + 1, max_depth, total, comp, err_total, count)


def psi_panels(double r, double alpha, edges, double tol, int max_depth=20):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.ascontiguousarray(edges, dtype=np.float64)
    cdef Py_ssize_t i, n = e.shape[0] - 1
    cdef double span = e[n] - e[0]
    cdef double total = 0.0, comp = 0.0, err_total = 0.0
    cdef long count = 0
    with nogil:
        for i in range(n):
            _adaptive(e[i], e[i + 1], r, alpha, tol * (e[i + 1] - e[i]) / span,
                      0, max_depth, &total, &comp, &err_total, &count)
    return total, err_total, count


def compensated_time_sums(proj, decay):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] p = np.ascontiguousarray(proj, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = np.ascontiguousarray(decay, dtype=np.float64)
    cdef Py_ssize_t n_steps = p.shape[0] - 1, L1 = p.shape[1], L2 = p.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] num = np.zeros((L1, L2))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] den = np.zeros((L1, L2))
    cdef Py_ssize_t i, a, b
    cdef double s, c, y, t, prev, s2, c2
    with nogil:
        for a in range(L1):
            for b in range(L2):
                s = 0.0
                c = 0.0
                s2 = 0.0
                c2 = 0.0
                for i in range(1, n_steps + 1):
                    prev = p[i - 1, a, b]
                    y = prev * (p[i, a, b] - d[a, b] * prev) - c
                    t = s + y
                    c = (t - s) - y
                    s = t
                    y = prev * prev - c2
                    t = s2 + y
                    c2 = (t - s2) - y
                    s2 = t
                num[a, b] = s
                den[a, b] = s2
    return num, den


def triple_increment_sumsq(obs, jidx, kidx):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] x = np.ascontiguousarray(obs, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] jj = np.ascontiguousarray(jidx, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] kk = np.ascontiguousarray(kidx, dtype=np.int64)
    cdef Py_ssize_t n_steps = x.shape[0] - 1
    cdef Py_ssize_t m1 = jj.shape[0] - 1, m2 = kk.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((m1, m2))
    cdef Py_ssize_t i, j, k, j0, j1, k0, k1
    cdef double t, acc
    with nogil:
        for j in range(m1):
            j0 = jj[j]
            j1 = jj[j + 1]
            for k in range(m2):
                k0 = kk[k]
                k1 = kk[k + 1]
                acc = 0.0
                for i in range(1, n_steps + 1):
                    t = (((x[i, j1, k1] - x[i - 1, j1, k1]) - (x[i, j0, k1] - x[i - 1, j0, k1]))
                         - ((x[i, j1, k0] - x[i - 1, j1, k0]) - (x[i, j0, k0] - x[i - 1, j0, k0])))
                    acc += t * t
                out[j, k] = acc
    return out

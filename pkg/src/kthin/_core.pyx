# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_fallback`` for the reference numpy version."""
import numpy as np

cimport numpy as cnp
from libc.math cimport asinh, cosh, exp, fabs, floor, lgamma, log, log1p, sqrt

cnp.import_array()

NAME = "compiled"

cdef double LN2 = 0.6931471805599453
cdef double LOG_TAIL = -60.0
cdef double REL_TOL = 1e-14
cdef int MIN_INTERVALS = 32
cdef int MAX_INTERVALS = 1 << 17


cdef struct Kern:
    int code
    double scale
    double p0
    double p1
    double p2
    int order
    double half
    const double* coefs


cdef inline double _logcosh(double x) noexcept nogil:
    cdef double ax = fabs(x)
    return ax + log1p(exp(-2.0 * ax)) - LN2


cdef inline double _bessel_exponent(double b, double r, double t) noexcept nogil:
    return -r * cosh(t) + _logcosh(b * t)


cdef double _log_bessel_half(int p, double r) noexcept nogil:
    cdef int k
    cdef double top = -1e308
    cdef double term, total = 0.0
    for k in range(p + 1):
        term = lgamma(p + k + 1.0) - lgamma(k + 1.0) - lgamma(p - k + 1.0) - k * log(2.0 * r)
        if term > top:
            top = term
    for k in range(p + 1):
        term = lgamma(p + k + 1.0) - lgamma(k + 1.0) - lgamma(p - k + 1.0) - k * log(2.0 * r)
        total += exp(term - top)
    return 0.5 * log(3.141592653589793 / (2.0 * r)) - r + top + log(total)


cdef double log_bessel_k(double b, double r) noexcept nogil:
    cdef double p = b - 0.5
    cdef double t_peak, shift, upper, h, total, previous, v0, v1
    cdef int intervals, i
    if p >= 0.0 and p == floor(p) and p < 1000.0:
        return _log_bessel_half(<int>p, r)
    t_peak = asinh(b / r)
    shift = _bessel_exponent(b, r, 0.0)
    v0 = _bessel_exponent(b, r, t_peak)
    if v0 > shift:
        shift = v0
    upper = t_peak if t_peak > 1.0 else 1.0
    while _bessel_exponent(b, r, upper) - shift > LOG_TAIL:
        upper += (0.5 * upper if 0.5 * upper > 1.0 else 1.0)
    intervals = MIN_INTERVALS
    previous = -1.0
    while True:
        h = upper / intervals
        total = 0.0
        for i in range(intervals + 1):
            total += exp(_bessel_exponent(b, r, i * h) - shift)
        v0 = exp(_bessel_exponent(b, r, 0.0) - shift)
        v1 = exp(_bessel_exponent(b, r, upper) - shift)
        total = h * (total - 0.5 * v0 - 0.5 * v1)
        if previous >= 0.0 and fabs(total - previous) <= REL_TOL * total:
            break
        if intervals >= MAX_INTERVALS:
            break
        previous = total
        intervals *= 2
    return shift + log(total)


def log_bessel_k_c(double b, double r):
    """Compiled log K_b(r), exposed for cross-checking."""
    return log_bessel_k(b, r)


cdef inline double _bspline1(const Kern* k, double z) noexcept nogil:
    cdef int j
    cdef double left, base, val = 0.0, pw
    cdef int e
    if z >= k.half:
        return 0.0
    if k.order == 1:
        return 1.0
    left = k.half - z
    for j in range(k.order + 1):
        base = left - j
        if base <= 0.0:
            break
        pw = 1.0
        for e in range(k.order - 1):
            pw *= base
        val += k.coefs[j] * pw
    return val


cdef inline double kval(const Kern* k, const double* x, const double* y, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0, diff, r, v
    if k.code == 0:
        for j in range(d):
            diff = x[j] - y[j]
            s += diff * diff
        return k.scale * exp(-k.p0 * s)
    if k.code == 1:
        for j in range(d):
            diff = x[j] - y[j]
            s += diff * diff
        r = k.p1 * sqrt(s)
        if r == 0.0:
            return k.scale
        return k.scale * exp(k.p2 + k.p0 * log(r) + log_bessel_k(k.p0, r))
    v = k.p1
    for j in range(d):
        v *= _bspline1(k, fabs(x[j] - y[j]))
        if v == 0.0:
            return 0.0
    return v


cdef Kern _unpack(tuple kern, const double[::1] params):
    cdef Kern k
    k.code = kern[0]
    k.scale = kern[2]
    k.p0 = params[0]
    k.p1 = params[1] if params.shape[0] > 1 else 0.0
    k.p2 = params[2] if params.shape[0] > 2 else 0.0
    k.order = 0
    k.half = 0.0
    k.coefs = NULL
    if k.code == 2:
        k.order = <int>params[0]
        k.half = k.order / 2.0
        k.p1 = k.scale * exp(params[1])
        k.coefs = &params[2]
    return k


def kernel_matrix(tuple kern, const double[:, ::1] X, const double[:, ::1] Y):
    cdef const double[::1] params = np.ascontiguousarray(kern[1], dtype=np.float64)
    cdef Kern k = _unpack(kern, params)
    cdef Py_ssize_t a = X.shape[0], b = Y.shape[0], d = X.shape[1], i, j
    out = np.empty((a, b))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(a):
            for j in range(b):
                o[i, j] = kval(&k, &X[i, 0], &Y[j, 0], d)
    return out


def kernel_diag(tuple kern, const double[:, ::1] X):
    cdef const double[::1] params = np.ascontiguousarray(kern[1], dtype=np.float64)
    cdef Kern k = _unpack(kern, params)
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = kval(&k, &X[i, 0], &X[i, 0], d)
    return out


def kernel_row_sums(tuple kern, const double[:, ::1] X):
    """g[z] = sum_i k(x_i, x_z) using each unordered pair once."""
    cdef const double[::1] params = np.ascontiguousarray(kern[1], dtype=np.float64)
    cdef Kern k = _unpack(kern, params)
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, z
    cdef double v
    g = np.zeros(n)
    cdef double[::1] gv = g
    with nogil:
        for i in range(n):
            gv[i] += kval(&k, &X[i, 0], &X[i, 0], d)
            for z in range(i + 1, n):
                v = kval(&k, &X[i, 0], &X[z, 0], d)
                gv[i] += v
                gv[z] += v
    return g, n * (n + 1) // 2


def kt_split_core(tuple kern, const double[:, ::1] X, int m, const double[:, ::1] log_terms,
                  const double[::1] uniforms):
    """Compiled twin of ``_fallback.kt_split_core``; same inputs and outputs."""
    cdef const double[::1] params = np.ascontiguousarray(kern[1], dtype=np.float64)
    cdef Kern k = _unpack(kern, params)
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    levels = [np.arange(n, dtype=np.int64)[None, :]]
    levels += [np.empty((1 << j, n >> j), dtype=np.int64) for j in range(1, m + 1)]
    sigma_sq = [np.zeros(1 << (j - 1)) for j in range(1, m + 1)]
    max_b_sq = [np.zeros(1 << (j - 1)) for j in range(1, m + 1)]
    diag = kernel_diag(kern, np.asarray(X))
    cdef double[::1] dg = diag
    cdef long long[:, ::1] parent_v, child_v
    cdef double[::1] sig, mb
    cdef Py_ssize_t i, j, t, ps, ell, q, u_idx = 0
    cdef long long x, xp, y, tmp
    cdef double lt, b_sq, alpha, cross, s2, a, factor, prob, kx, kxp
    cdef long long evals = n
    for i in range(1, n + 1):
        j = 1
        while j <= m and i % (1 << j) == 0:
            t = i >> j
            ps = 2 * t
            lt = log_terms[j - 1, t - 1]
            parent_v = levels[j - 1]
            child_v = levels[j]
            sig = sigma_sq[j - 1]
            mb = max_b_sq[j - 1]
            with nogil:
                for ell in range(1 << (j - 1)):
                    x = parent_v[ell, ps - 2]
                    xp = parent_v[ell, ps - 1]
                    alpha = dg[xp] - dg[x]
                    cross = 0.0
                    for q in range(ps):
                        y = parent_v[ell, q]
                        kx = kval(&k, &X[y, 0], &X[x, 0], d)
                        kxp = kval(&k, &X[y, 0], &X[xp, 0], d)
                        alpha += kx - kxp
                        if q == ps - 2:
                            cross = kxp
                    evals += 2 * ps
                    for q in range(t - 1):
                        y = child_v[2 * ell, q]
                        alpha -= 2.0 * (kval(&k, &X[y, 0], &X[x, 0], d) - kval(&k, &X[y, 0], &X[xp, 0], d))
                    evals += 2 * (t - 1)
                    b_sq = dg[x] + dg[xp] - 2.0 * cross
                    if b_sq < 0.0:
                        b_sq = 0.0
                    if b_sq > 0.0:
                        s2 = sig[ell]
                        a = sqrt(b_sq * s2 * lt)
                        if b_sq > a:
                            a = b_sq
                        factor = 1.0 + s2 * (b_sq - 2.0 * a) / (a * a)
                        if factor > 0.0:
                            sig[ell] = s2 + b_sq * factor
                        if b_sq > mb[ell]:
                            mb[ell] = b_sq
                        prob = 0.5 * (1.0 - alpha / a)
                        if prob < 0.0:
                            prob = 0.0
                        if prob > 1.0:
                            prob = 1.0
                    else:
                        prob = 0.5
                    if uniforms[u_idx] < prob:
                        tmp = x
                        x = xp
                        xp = tmp
                    u_idx += 1
                    child_v[2 * ell, t - 1] = x
                    child_v[2 * ell + 1, t - 1] = xp
            j += 1
    return levels, sigma_sq, max_b_sq, evals

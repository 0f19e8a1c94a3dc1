"""Special functions used by the kernel families.

Modified Bessel functions of the second kind (a.k.a. third kind, K_b) are
evaluated from the integral representation

    K_b(r) = int_0^inf exp(-r cosh t) cosh(b t) dt

with a trapezoid rule whose step is halved until successive estimates agree.
The integrand is analytic and decays doubly exponentially, so the trapezoid
rule converges geometrically in the number of nodes. Half-integer orders use
the terminating closed form instead.
"""
import math

import numpy as np

from .exceptions import DomainError

BESSEL_MAX_ORDER = 64.0
BESSEL_MAX_ARG = 128.0

_LOG_TAIL = -60.0
_REL_TOL = 1e-14
_MIN_INTERVALS = 32
_MAX_INTERVALS = 1 << 17


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def _half_integer_index(b):
    p = b - 0.5
    if p >= 0 and float(p).is_integer():
        return int(p)
    return None


def _log_bessel_k_half(p, r):
    # K_{p+1/2}(r) = sqrt(pi/(2r)) e^{-r} sum_k (p+k)! / (k! (p-k)!) (2r)^{-k}
    k = np.arange(p + 1)
    log_terms = (
        np.array([math.lgamma(p + kk + 1) - math.lgamma(kk + 1) - math.lgamma(p - kk + 1) for kk in k])
        - k * math.log(2.0 * r)
    )
    top = log_terms.max()
    return 0.5 * math.log(math.pi / (2.0 * r)) - r + top + math.log(np.exp(log_terms - top).sum())


def _log_bessel_k_quad(b, r):
    def exponent(t):
        return -r * np.cosh(t) + _logcosh(b * t)

    t_peak = math.asinh(b / r)
    shift = max(float(exponent(0.0)), float(exponent(t_peak)))
    upper = max(t_peak, 1.0)
    while float(exponent(upper)) - shift > _LOG_TAIL:
        upper += max(1.0, 0.5 * upper)

    intervals = _MIN_INTERVALS
    previous = None
    while True:
        h = upper / intervals
        vals = np.exp(exponent(np.linspace(0.0, upper, intervals + 1)) - shift)
        total = h * (vals.sum() - 0.5 * vals[0] - 0.5 * vals[-1])
        if previous is not None and abs(total - previous) <= _REL_TOL * total:
            break
        if intervals >= _MAX_INTERVALS:
            break
        previous = total
        intervals *= 2
    return shift + math.log(total)


def log_bessel_k_unchecked(b, r):
    """log K_b(r) for any b >= 0, r > 0 without the envelope check."""
    b = abs(float(b))
    r = float(r)
    p = _half_integer_index(b)
    if p is not None:
        return _log_bessel_k_half(p, r)
    return _log_bessel_k_quad(b, r)


def _check_envelope(b, r):
    if not (math.isfinite(b) and math.isfinite(r)):
        raise DomainError(f"non-finite Bessel argument (b={b}, r={r})")
    if not 0.0 < b <= BESSEL_MAX_ORDER:
        raise DomainError(f"Bessel order {b} outside (0, {BESSEL_MAX_ORDER}]")
    if not 0.0 < r <= BESSEL_MAX_ARG:
        raise DomainError(f"Bessel argument {r} outside (0, {BESSEL_MAX_ARG}]")


def log_bessel_k(b, r):
    """Natural log of the modified Bessel function K_b(r)."""
    b, r = float(b), float(r)
    _check_envelope(b, r)
    return log_bessel_k_unchecked(b, r)


def bessel_k(b, r):
    """Modified Bessel function of the second kind K_b(r).

    Supported for 0 < b <= 64 and 0 < r <= 128; relative accuracy is around
    1e-12 over that envelope. Values that overflow a double return inf.

    Raises:
      DomainError: if (b, r) lies outside the supported envelope.
    """
    lv = log_bessel_k(b, r)
    return math.exp(lv) if lv < 709.0 else math.inf


def log_bessel_k_array(b, r):
    """Vectorised log K_b over an array of positive arguments."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    flat_r = r.ravel()
    flat_out = out.ravel()
    # few distinct radii in practice for small inputs; memoise per value
    uniq, inverse = np.unique(flat_r, return_inverse=True)
    vals = np.array([log_bessel_k_unchecked(b, x) for x in uniq])
    flat_out[:] = vals[inverse]
    return flat_out.reshape(r.shape)


def bspline_univariate(order, a):
    """Unnormalised univariate B-spline of the given order.

    f_order is the order-fold convolution of the indicator of [-1/2, 1/2]:
    f_1 is that indicator, f_2 the unit triangle, and so on. The function is
    even, peaks at 0 and vanishes for |a| >= order / 2.

    Args:
      order: positive integer number of convolved indicators.
      a: evaluation point (scalar or array).
    """
    order = int(order)
    if order < 1:
        raise ValueError("B-spline order must be a positive integer")
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite B-spline argument")
    result = _bspline_eval(order, a)
    return float(result) if result.ndim == 0 else result


def _bspline_eval(order, a):
    # evaluate on the left half (fewer positive-part terms, less cancellation)
    left = -np.abs(a)
    half = order / 2.0
    if order == 1:
        return np.where(np.abs(a) < 0.5, 1.0, 0.0)
    total = np.zeros_like(left)
    for j in range(order + 1):
        base = left + half - j
        total = total + (-1) ** j * math.comb(order, j) * np.where(base > 0, base, 0.0) ** (order - 1)
    total /= math.factorial(order - 1)
    return np.where(np.abs(a) >= half, 0.0, total)


def bspline_peak(order):
    """Peak value f_order(0) from the truncated alternating sum."""
    order = int(order)
    total = 0.0
    for j in range(order // 2 + 1):
        total += (-1) ** j * math.comb(order, j) * (order / 2.0 - j) ** (order - 1)
    return total / math.factorial(order - 1)

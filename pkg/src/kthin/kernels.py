"""Shift-invariant kernels and their square-root partners.

Three families are supported, each normalised so that kappa(0) = 1 before
the multiplicative ``scale``:

* Gaussian(sigma):   exp(-|z|^2 / (2 sigma^2))
* Matern(nu, gamma): c_b (gamma |z|)^b K_b(gamma |z|),  b = nu - d/2,
  c_b = 2^(1-b) / Gamma(b)
* BSpline(p):        S_{p+1,d} prod_j f_{p+1}(z_j), where f_o is the o-fold
  convolution of the unit-interval indicator and S_{o,d} = f_o(0)^(-d)

The square-root kernel k_rt of k satisfies k(x, y) = int k_rt(x, z) k_rt(y, z) dz.
"""
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _backend
from .exceptions import DegenerateBandwidthWarning, QuadratureError, UnsupportedKernelError
from .special import bspline_peak

GAUSSIAN = "gaussian"
MATERN = "matern"
BSPLINE = "bspline"
FAMILIES = (GAUSSIAN, MATERN, BSPLINE)

MEDIAN_MAX_POINTS = 4 ** 7

# backend family codes
_CODES = {GAUSSIAN: 0, MATERN: 1, BSPLINE: 2}


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a shift-invariant kernel.

    Use the ``gaussian``, ``matern`` and ``bspline`` constructors rather than
    filling the fields by hand. ``degree`` is the B-spline degree p, so the
    kernel is a product of order-(p+1) univariate B-splines.
    """

    family: str
    dim: int
    sigma: float = None
    nu: float = None
    gamma: float = None
    degree: int = None
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("kernel dimension must be a positive integer")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError("kernel scale must be positive and finite")
        if self.family == GAUSSIAN:
            if self.sigma is None or not (math.isfinite(self.sigma) and self.sigma > 0):
                raise ValueError("Gaussian kernel needs sigma > 0")
        elif self.family == MATERN:
            if self.nu is None or self.gamma is None:
                raise ValueError("Matern kernel needs nu and gamma")
            if not self.gamma > 0:
                raise ValueError("Matern kernel needs gamma > 0")
            if not self.nu > self.dim / 2.0:
                raise ValueError("Matern kernel needs nu > d/2")
        else:
            if self.degree is None or int(self.degree) != self.degree or self.degree < 0:
                raise ValueError("B-spline kernel needs a non-negative integer degree")
            object.__setattr__(self, "degree", int(self.degree))

    @classmethod
    def gaussian(cls, dim, sigma, scale=1.0):
        return cls(GAUSSIAN, dim, sigma=float(sigma), scale=float(scale))

    @classmethod
    def matern(cls, dim, nu, gamma, scale=1.0):
        return cls(MATERN, dim, nu=float(nu), gamma=float(gamma), scale=float(scale))

    @classmethod
    def bspline(cls, dim, degree, scale=1.0):
        return cls(BSPLINE, dim, degree=int(degree), scale=float(scale))

    def rescaled(self, factor):
        """Copy with ``scale`` multiplied by ``factor``."""
        return replace(self, scale=self.scale * float(factor))

    @property
    def matern_order(self):
        return self.nu - self.dim / 2.0

    @property
    def packed(self):
        """(family code, float parameters, scale) tuple consumed by the backends."""
        if self.family == GAUSSIAN:
            params = [1.0 / (2.0 * self.sigma ** 2)]
        elif self.family == MATERN:
            b = self.matern_order
            params = [b, self.gamma, (1.0 - b) * math.log(2.0) - math.lgamma(b)]
        else:
            order = self.degree + 1
            coefs = [(-1) ** j * math.comb(order, j) / math.factorial(order - 1) for j in range(order + 1)]
            params = [order, log_bspline_norm(order, self.dim)] + coefs
        return _CODES[self.family], np.asarray(params, dtype=float), float(self.scale)


def log_bspline_norm(order, dim):
    """log S_{order,dim} = -dim * log f_order(0)."""
    return -dim * math.log(bspline_peak(order))


def _as_point(x, dim, name):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise ValueError(f"{name} has dimension {x.shape[0]}, kernel expects {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def as_points(X, dim=None):
    """Validate and return an (n, d) float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("points must form a non-empty (n, d) array")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"points have dimension {X.shape[1]}, kernel expects {dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite values")
    return np.ascontiguousarray(X)


def eval_kernel(spec, x, y):
    """k(x, y) for a single pair of points."""
    x = _as_point(x, spec.dim, "x")
    y = _as_point(y, spec.dim, "y")
    return float(_backend.get().kernel_matrix(spec.packed, x[None, :], y[None, :])[0, 0])


def kernel_matrix(spec, X, Y=None):
    """Matrix of kernel values k(X[i], Y[j])."""
    X = as_points(X, spec.dim)
    Y = X if Y is None else as_points(Y, spec.dim)
    return _backend.get().kernel_matrix(spec.packed, X, Y)


def sqrt_kernel_of(spec):
    """Square-root partner of a target kernel.

    Gaussian(sigma) maps to a rescaled Gaussian(sigma / sqrt 2), Matern(nu,
    gamma) to a rescaled Matern(nu / 2, gamma) and BSpline(2 beta + 1) to a
    rescaled BSpline(beta). A target scale c contributes sqrt(c) to the
    partner's scale. Constants are assembled in log space.

    Raises:
      UnsupportedKernelError: if the target lies outside the parameter range
        where a square-root kernel exists (nu <= d for Matern; B-spline
        degree not of the form 2 beta + 1 with beta odd).
    """
    d = spec.dim
    log_scale = 0.5 * math.log(spec.scale)
    if spec.family == GAUSSIAN:
        log_scale += 0.25 * d * math.log(2.0 / (math.pi * spec.sigma ** 2))
        return KernelSpec.gaussian(d, spec.sigma / math.sqrt(2.0), scale=math.exp(log_scale))
    if spec.family == MATERN:
        nu, gamma = spec.nu, spec.gamma
        if not nu > d:
            raise UnsupportedKernelError(f"Matern square-root kernel needs nu > d (nu={nu}, d={d})")
        log_scale += (
            0.25 * d * math.log(gamma ** 2 / (4.0 * math.pi))
            + 0.5 * (math.lgamma(nu) - math.lgamma(nu - d / 2.0))
            + math.lgamma((nu - d) / 2.0)
            - math.lgamma(nu / 2.0)
        )
        return KernelSpec.matern(d, nu / 2.0, gamma, scale=math.exp(log_scale))
    p = spec.degree
    beta = (p - 1) // 2
    if p < 3 or p % 2 == 0 or beta % 2 == 0:
        raise UnsupportedKernelError(
            f"B-spline square-root kernel needs degree 2*beta+1 with beta odd (got degree {p})"
        )
    log_scale += 0.5 * log_bspline_norm(2 * beta + 2, d) - log_bspline_norm(beta + 1, d)
    return KernelSpec.bspline(d, beta, scale=math.exp(log_scale))


def _panel_rule(breaks, panels, per_panel=8):
    """Composite Gauss-Legendre nodes on [breaks[0], breaks[-1]].

    Every breakpoint is a panel boundary; remaining panels are spread evenly.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    lo, hi = breaks[0], breaks[-1]
    grid = np.union1d(breaks, np.linspace(lo, hi, max(panels, 1) + 1))
    gx, gw = leggauss(per_panel)
    left, right = grid[:-1], grid[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()
    return nodes, weights


def _sqrt_support(sqrt, x, y):
    """Per-coordinate integration interval and kink locations for the product grid."""
    if sqrt.family == BSPLINE:
        half = (sqrt.degree + 1) / 2.0
        lo = np.maximum(x, y) - half
        hi = np.minimum(x, y) + half
        kinks = [
            np.concatenate([x[j] + np.arange(-half, half + 1.0), y[j] + np.arange(-half, half + 1.0)])
            for j in range(sqrt.dim)
        ]
        return lo, hi, kinks
    if sqrt.family == GAUSSIAN:
        reach = 12.0 * sqrt.sigma * math.sqrt(2.0)
    else:
        # grow the radius until the partner has decayed below e^-40 of its peak
        reach = 1.0 / sqrt.gamma
        probe = sqrt.rescaled(1.0 / sqrt.scale)
        origin = np.zeros(sqrt.dim)
        while True:
            e = np.zeros(sqrt.dim)
            e[0] = reach
            if eval_kernel(probe, origin, e) < math.exp(-40.0):
                break
            reach *= 1.5
    lo = np.minimum(x, y) - reach
    hi = np.maximum(x, y) + reach
    kinks = [np.array([x[j], y[j]]) for j in range(sqrt.dim)]
    return lo, hi, kinks


def _sqrt_quadrature(sqrt, x, y, nodes_per_dim):
    lo, hi, kinks = _sqrt_support(sqrt, x, y)
    if np.any(hi <= lo):
        return 0.0
    rules = []
    for j in range(sqrt.dim):
        breaks = np.concatenate([[lo[j], hi[j]], kinks[j][(kinks[j] > lo[j]) & (kinks[j] < hi[j])]])
        rules.append(_panel_rule(breaks, max(1, nodes_per_dim // 8)))
    if sqrt.dim == 1:
        Z = rules[0][0][:, None]
        W = rules[0][1]
    else:
        mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        Z = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        W = np.prod(np.stack([w.ravel() for w in wmesh], axis=1), axis=1)
    kx = kernel_matrix(sqrt, Z, x[None, :])[:, 0]
    ky = kernel_matrix(sqrt, Z, y[None, :])[:, 0]
    return float(np.sum(W * kx * ky))


def verify_sqrt_identity(target, sqrt, x, y, quad_nodes=2001):
    """|k(x, y) - int k_rt(x, z) k_rt(y, z) dz| by product-grid quadrature.

    The integral uses composite Gauss-Legendre panels whose boundaries include
    every kink of the integrand. A second pass with half the nodes guards
    against an unresolved integrand.

    Raises:
      QuadratureError: if refining the grid makes the discrepancy worse.
    """
    if target.dim != sqrt.dim:
        raise ValueError("target and square-root kernels differ in dimension")
    if target.dim > 2:
        raise ValueError("quadrature check supports d <= 2 only")
    x = _as_point(x, target.dim, "x")
    y = _as_point(y, target.dim, "y")
    exact = eval_kernel(target, x, y)
    per_dim = quad_nodes if target.dim == 1 else max(64, int(math.sqrt(quad_nodes)) * 4)
    fine = abs(exact - _sqrt_quadrature(sqrt, x, y, per_dim))
    coarse = abs(exact - _sqrt_quadrature(sqrt, x, y, max(8, per_dim // 2)))
    if fine > 10.0 * coarse and fine > 1e-9 * max(1.0, abs(exact)):
        raise QuadratureError(f"quadrature diverging: coarse error {coarse:.3g}, fine error {fine:.3g}")
    return fine


def median_heuristic(points, max_points=MEDIAN_MAX_POINTS):
    """Median pairwise Euclidean distance of a standard-thinned subset.

    The input is standard-thinned (keeping the final point) down to
    ``min(n, max_points)`` points first. With an even number of pairs the
    median averages the two middle order statistics. Identical points give 0
    together with a ``DegenerateBandwidthWarning``.
    """
    from .thinning import standard_thin

    X = as_points(points)
    n = X.shape[0]
    if n < 2:
        raise ValueError("median heuristic needs at least two points")
    size = min(n, int(max_points))
    if size < 2:
        raise ValueError("max_points must be at least 2")
    X = X[standard_thin(n, size, strict=False).indices]
    med = _median_pairwise_distance(X)
    if med == 0.0:
        warnings.warn("all sampled points coincide; bandwidth is 0", DegenerateBandwidthWarning, stacklevel=2)
    return med


_PDIST_LIMIT = 1 << 24


def _median_pairwise_distance(X):
    from scipy.spatial.distance import pdist

    n = X.shape[0]
    pairs = n * (n - 1) // 2
    if pairs <= _PDIST_LIMIT:
        return float(np.median(pdist(X)))
    lo_rank = (pairs - 1) // 2
    hi_rank = pairs // 2
    a, b = _kth_pairwise_distances(X, [lo_rank, hi_rank])
    return 0.5 * (a + b)


def _pairwise_chunks(X, rows=512):
    n = X.shape[0]
    for start in range(0, n - 1, rows):
        stop = min(n - 1, start + rows)
        diff = X[start:stop, None, :] - X[None, start + 1:, :]
        D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        # keep strict upper triangle only
        cols = np.arange(start + 1, n)[None, :]
        keep = cols > np.arange(start, stop)[:, None]
        yield D[keep]


def _kth_pairwise_distances(X, ranks):
    """Exact order statistics of all pairwise distances without storing them.

    A strided subsample of the distances brackets the wanted ranks; one more
    streamed pass counts everything below the bracket and collects what falls
    inside. The bracket widens until it provably contains every rank.
    """
    n = X.shape[0]
    total = n * (n - 1) // 2
    sample = np.concatenate([c[::97] for c in _pairwise_chunks(X)])
    for widen in (0.002, 0.02, 0.2, 1.0):
        p_lo = min(ranks) / total - widen
        p_hi = max(ranks) / total + widen
        lo = np.quantile(sample, p_lo) if p_lo > 0 else -math.inf
        hi = np.quantile(sample, p_hi) if p_hi < 1 else math.inf
        below = 0
        inside = []
        for chunk in _pairwise_chunks(X):
            below += int(np.count_nonzero(chunk < lo))
            inside.append(chunk[(chunk >= lo) & (chunk <= hi)])
        vals = np.sort(np.concatenate(inside))
        if all(below <= r < below + vals.size for r in ranks):
            return [float(vals[r - below]) for r in ranks]
    raise RuntimeError("order-statistic bracket failed to converge")

"""Pure numpy implementation of the hot kernels.

Mirrors the compiled ``_core`` extension function for function; used when the
extension is unavailable or when ``KTHIN_BACKEND=python``.
"""
import math

import numpy as np

from .special import log_bessel_k_array

NAME = "python"

_CHUNK = 1 << 22


def _pair_sqdist(X, Y):
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kernel_block(kern, X, Y):
    code, params, scale = kern
    if code == 0:
        return scale * np.exp(-params[0] * _pair_sqdist(X, Y))
    if code == 1:
        b, gamma, log_norm = params[0], params[1], params[2]
        r = gamma * np.sqrt(_pair_sqdist(X, Y))
        out = np.full(r.shape, scale)
        pos = r > 0
        if np.any(pos):
            rp = r[pos]
            out[pos] = scale * np.exp(log_norm + b * np.log(rp) + log_bessel_k_array(b, rp))
        return out
    order = int(params[0])
    log_norm = params[1]
    coefs = params[2:]
    half = order / 2.0
    out = np.full((X.shape[0], Y.shape[0]), scale * math.exp(log_norm))
    for j in range(X.shape[1]):
        z = np.abs(X[:, j][:, None] - Y[:, j][None, :])
        out *= _bspline_values(order, coefs, half, z)
    return out


def _bspline_values(order, coefs, half, z):
    if order == 1:
        return np.where(z < 0.5, 1.0, 0.0)
    left = half - z
    vals = np.zeros_like(z)
    for j in range(order + 1):
        base = left - j
        vals += coefs[j] * np.where(base > 0, base, 0.0) ** (order - 1)
    return np.where(z >= half, 0.0, vals)


def kernel_matrix(kern, X, Y):
    rows = max(1, _CHUNK // max(1, Y.shape[0] * X.shape[1]))
    if X.shape[0] <= rows:
        return _kernel_block(kern, X, Y)
    out = np.empty((X.shape[0], Y.shape[0]))
    for s in range(0, X.shape[0], rows):
        out[s:s + rows] = _kernel_block(kern, X[s:s + rows], Y)
    return out


def kernel_diag(kern, X):
    return np.array([_kernel_block(kern, x[None, :], x[None, :])[0, 0] for x in X])


def kernel_row_sums(kern, X):
    """g[z] = sum_i k(x_i, x_z), accumulated in fixed row-block order."""
    n = X.shape[0]
    g = np.zeros(n)
    rows = max(1, _CHUNK // max(1, n * X.shape[1]))
    for s in range(0, n, rows):
        g += kernel_matrix(kern, X[s:s + rows], X).sum(axis=0)
    return g, n * n


def kt_split_core(kern, X, m, log_terms, uniforms):
    """Repeated probabilistic halving of X into 2**m balanced coresets.

    Args:
      kern: packed kernel tuple for the square-root kernel.
      X: (n, d) points with n divisible by 2**m.
      m: number of halving levels.
      log_terms: (m, n/2) array; entry [j-1, t-1] is the 2 log(L / delta)
        factor for the t-th pair formed at level j.
      uniforms: one U[0, 1) variate per halving decision, in loop order.

    Returns:
      (levels, sigma_sq, max_b_sq, kernel_evals): levels[j] is a
      (2**j, n / 2**j) index array.
    """
    n = X.shape[0]
    levels = [np.arange(n, dtype=np.int64)[None, :]]
    levels += [np.empty((1 << j, n >> j), dtype=np.int64) for j in range(1, m + 1)]
    sigma_sq = [np.zeros(1 << (j - 1)) for j in range(1, m + 1)]
    max_b_sq = [np.zeros(1 << (j - 1)) for j in range(1, m + 1)]
    diag = kernel_diag(kern, X)
    evals = n
    u_idx = 0
    for i in range(1, n + 1):
        j = 1
        while j <= m and i % (1 << j) == 0:
            t = i >> j
            ps = 2 * t
            lt = log_terms[j - 1, t - 1]
            sig = sigma_sq[j - 1]
            for ell in range(1 << (j - 1)):
                parent = levels[j - 1][ell, :ps]
                x, xp = parent[ps - 2], parent[ps - 1]
                pair = X[[x, xp]]
                kp = kernel_matrix(kern, X[parent], pair)
                evals += 2 * ps
                b_sq = diag[x] + diag[xp] - 2.0 * kp[ps - 2, 1]
                if b_sq < 0.0:
                    b_sq = 0.0
                alpha = diag[xp] - diag[x] + np.sum(kp[:, 0] - kp[:, 1])
                if t > 1:
                    kc = kernel_matrix(kern, X[levels[j][2 * ell, :t - 1]], pair)
                    evals += 2 * (t - 1)
                    alpha -= 2.0 * np.sum(kc[:, 0] - kc[:, 1])
                u = uniforms[u_idx]
                u_idx += 1
                if b_sq > 0.0:
                    s2 = sig[ell]
                    a = max(math.sqrt(b_sq * s2 * lt), b_sq)
                    factor = 1.0 + s2 * (b_sq - 2.0 * a) / (a * a)
                    if factor > 0.0:
                        sig[ell] = s2 + b_sq * factor
                    if b_sq > max_b_sq[j - 1][ell]:
                        max_b_sq[j - 1][ell] = b_sq
                    prob = min(1.0, max(0.0, 0.5 * (1.0 - alpha / a)))
                else:
                    prob = 0.5
                if u < prob:
                    x, xp = xp, x
                levels[j][2 * ell, t - 1] = x
                levels[j][2 * ell + 1, t - 1] = xp
            j += 1
    return levels, sigma_sq, max_b_sq, evals

"""Maximum mean discrepancy between empirical measures and closed-form targets."""
import math
import warnings

import numpy as np

from . import _backend
from .kernels import GAUSSIAN, as_points, kernel_matrix

_COMPENSATE_FROM = 1 << 12


def _total(values):
    values = np.asarray(values, dtype=float).ravel()
    if values.size >= _COMPENSATE_FROM:
        return math.fsum(values)
    return float(np.sum(values))


def _clamp(raw, reference):
    if raw < -1e-6 * max(reference, 1e-300):
        warnings.warn(f"squared MMD {raw:.3g} is markedly negative; clamped to 0", RuntimeWarning, stacklevel=3)
    return max(raw, 0.0)


def mmd_sq_empirical(k, X, Y):
    """Squared MMD between the empirical measures on X and Y (clamped at 0)."""
    X = as_points(X, k.dim)
    Y = as_points(Y, k.dim)
    n, s = X.shape[0], Y.shape[0]
    xx = _total(kernel_matrix(k, X)) / (n * n)
    yy = _total(kernel_matrix(k, Y)) / (s * s)
    xy = _total(kernel_matrix(k, X, Y)) / (n * s)
    return _clamp(xx + yy - 2.0 * xy, k.scale)


def mmd_empirical(k, X, Y):
    return math.sqrt(mmd_sq_empirical(k, X, Y))


class MmdWorkspace:
    """Cached kernel sums for MMD(S_in, coreset) queries and swap updates.

    Holds g[z] = sum_i k(x_i, x_z), the grand total sum_z g[z], the kernel
    diagonal, and for a current coreset S the sums h[z] = sum_{w in S} k(x_z, w)
    and the coreset self-sum. Row sums cost O(n^2) kernel evaluations once;
    afterwards MMD of a coreset costs O(s) and a swap delta O(1).
    """

    def __init__(self, k, points):
        self.kernel = k
        self.points = as_points(points, k.dim)
        self.n = self.points.shape[0]
        backend = _backend.get()
        self.row_sums, evals = backend.kernel_row_sums(k.packed, self.points)
        self.diag = backend.kernel_diag(k.packed, self.points)
        self.total_sum = _total(self.row_sums)
        self.kernel_evals = evals + self.n
        self.coreset = None
        self.coreset_sums = None
        self.coreset_self = None

    def kernel_column(self, index):
        """k(x_z, x_index) for every input point z."""
        self.kernel_evals += self.n
        return _backend.get().kernel_matrix(self.kernel.packed, self.points, self.points[index][None, :])[:, 0]

    def _self_sum(self, idx):
        self.kernel_evals += len(idx) ** 2
        return _total(_backend.get().kernel_matrix(self.kernel.packed, self.points[idx], self.points[idx]))

    def mmd_sq(self, indices):
        """Squared MMD between the input and the coreset given by ``indices``."""
        idx = np.asarray(indices, dtype=np.int64)
        s = idx.size
        raw = (
            self.total_sum / (self.n * self.n)
            - 2.0 * _total(self.row_sums[idx]) / (self.n * s)
            + self._self_sum(idx) / (s * s)
        )
        return _clamp(raw, self.kernel.scale)

    def set_coreset(self, indices):
        """Adopt ``indices`` as the current coreset and rebuild h and the self-sum."""
        idx = np.array(indices, dtype=np.int64)
        backend = _backend.get()
        K = backend.kernel_matrix(self.kernel.packed, self.points, self.points[idx])
        self.kernel_evals += self.n * idx.size
        self.coreset = idx
        self.coreset_sums = K.sum(axis=1)
        self.coreset_self = float(np.sum(self.coreset_sums[idx]))

    def current_mmd_sq(self):
        s = self.coreset.size
        raw = (
            self.total_sum / (self.n * self.n)
            - 2.0 * float(np.sum(self.row_sums[self.coreset])) / (self.n * s)
            + self.coreset_self / (s * s)
        )
        return _clamp(raw, self.kernel.scale)

    def swap_deltas(self, position, column=None):
        """Change in squared MMD when coreset[position] is replaced by each input point.

        Args:
          position: coreset slot being replaced.
          column: optional precomputed k(x_z, x_p) for the incumbent p.

        Returns:
          length-n array; entry z is MMD^2(with slot <- z) - MMD^2(current).
          The incumbent's own entry is exactly 0.
        """
        p = int(self.coreset[position])
        if column is None:
            column = self.kernel_column(p)
        n, s = self.n, self.coreset.size
        g, h = self.row_sums, self.coreset_sums
        cross = -2.0 * (g - g[p]) / (n * s)
        self_change = (2.0 * (h - column) + self.diag - 2.0 * h[p] + self.diag[p]) / (s * s)
        delta = cross + self_change
        delta[p] = 0.0
        return delta

    def swap_delta(self, position, z):
        return float(self.swap_deltas(position)[int(z)])

    def apply_swap(self, position, z, column_old=None, column_new=None):
        """Replace coreset[position] by z, updating h and the self-sum in O(n)."""
        p = int(self.coreset[position])
        z = int(z)
        if z == p:
            return
        if column_old is None:
            column_old = self.kernel_column(p)
        if column_new is None:
            column_new = self.kernel_column(z)
        s_self = self.coreset_self
        s_self += -2.0 * self.coreset_sums[p] + self.diag[p] + 2.0 * (self.coreset_sums[z] - column_old[z]) + self.diag[z]
        self.coreset_sums = self.coreset_sums - column_old + column_new
        self.coreset[position] = z
        self.coreset_self = s_self

    def check_consistency(self, rtol=1e-9):
        """Compare cached coreset sums against a fresh recomputation."""
        idx = self.coreset
        K = _backend.get().kernel_matrix(self.kernel.packed, self.points, self.points[idx])
        fresh_h = K.sum(axis=1)
        fresh_self = float(np.sum(fresh_h[idx]))
        scale = max(1.0, abs(fresh_self))
        if not np.allclose(self.coreset_sums, fresh_h, rtol=rtol, atol=rtol * idx.size * self.kernel.scale):
            raise AssertionError("stale coreset kernel sums")
        if abs(self.coreset_self - fresh_self) > rtol * scale:
            raise AssertionError("stale coreset self-sum")


def mmd_to_input(workspace, coreset):
    """MMD between the workspace's input and a coreset (indices or ``Coreset``)."""
    indices = getattr(coreset, "indices", coreset)
    return math.sqrt(workspace.mmd_sq(indices))


def swap_delta(workspace, coreset, position, z):
    """Squared-MMD change from replacing ``coreset[position]`` by input point ``z``."""
    indices = getattr(coreset, "indices", coreset)
    if workspace.coreset is None or not np.array_equal(workspace.coreset, indices):
        workspace.set_coreset(indices)
    return workspace.swap_delta(position, z)


def _gaussian_embedding_terms(k, means):
    s2 = k.sigma ** 2
    d = k.dim
    log_pk = 0.5 * d * math.log(s2 / (s2 + 1.0))
    log_ppk = 0.5 * d * math.log(s2 / (s2 + 2.0))
    return s2, log_pk, log_ppk


def target_mean_embedding(k, target, Y):
    """P k(y) = E_{X~P} k(X, y) for a Gaussian kernel and unit-covariance target."""
    _require_gaussian_pair(k, target)
    Y = as_points(Y, k.dim)
    means = target.component_means()
    s2, log_pk, _ = _gaussian_embedding_terms(k, means)
    sq = ((Y[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return k.scale * np.exp(log_pk - sq / (2.0 * (s2 + 1.0))).mean(axis=1)


def target_self_embedding(k, target):
    """P P k = E k(X, X') for independent X, X' ~ P."""
    _require_gaussian_pair(k, target)
    means = target.component_means()
    s2, _, log_ppk = _gaussian_embedding_terms(k, means)
    sq = ((means[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return float(k.scale * np.exp(log_ppk - sq / (2.0 * (s2 + 2.0))).mean())


def _require_gaussian_pair(k, target):
    from .exceptions import UnsupportedKernelError

    if k.family != GAUSSIAN:
        raise UnsupportedKernelError("closed-form target MMD needs a Gaussian kernel")
    if target.dim != k.dim:
        raise ValueError(f"target dimension {target.dim} differs from kernel dimension {k.dim}")


def mmd_sq_to_target(k, target, S):
    """Squared MMD between a target distribution and the empirical measure on S.

    Uses Gaussian convolution identities: for P = N(mu, I_d) and a Gaussian
    kernel of bandwidth sigma, P k(x) = (s2/(s2+1))^{d/2} exp(-|x-mu|^2 /
    (2(s2+1))) and P P k = (s2/(s2+2))^{d/2}, with s2 = sigma^2; mixtures
    average these over components.
    """
    S = as_points(S, k.dim)
    s = S.shape[0]
    raw = (
        target_self_embedding(k, target)
        - 2.0 * float(np.mean(target_mean_embedding(k, target, S)))
        + _total(kernel_matrix(k, S)) / (s * s)
    )
    return _clamp(raw, k.scale)


def mmd_to_target(k, target, S):
    return math.sqrt(mmd_sq_to_target(k, target, S))

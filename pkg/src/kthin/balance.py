"""Self-balancing walk: randomized online sign assignment.

Each incoming vector v_i receives a sign eta_i so the running signed sum w
stays small. With alpha = <w, v_i> and threshold a_i, the sign is +1 with
probability (1 - alpha / a_i) / 2, which pushes w back toward the origin.
If |alpha| exceeds the threshold the walk instead applies the correction
w <- w - v_i * alpha / a_i and records no sign.
"""
import math
from dataclasses import dataclass, field

import numpy as np

EXCEEDED = 0


@dataclass
class EuclideanWalkState:
    w: np.ndarray
    signs: list = field(default_factory=list)
    exceeded: bool = False

    @classmethod
    def start(cls, dim):
        return cls(w=np.zeros(dim))


def sbw_step(state, v, a, u):
    """Advance the walk by one vector.

    Args:
      state: current ``EuclideanWalkState``; updated in place and returned.
      v: incoming d-vector.
      a: positive threshold for this step.
      u: a U[0, 1) variate, consumed whichever branch is taken.
    """
    if not a > 0:
        raise ValueError("threshold must be positive")
    v = np.asarray(v, dtype=float)
    alpha = float(np.dot(state.w, v))
    if abs(alpha) > a:
        state.w = state.w - v * (alpha / a)
        state.exceeded = True
        state.signs.append(EXCEEDED)
        return state
    eta = 1 if u < 0.5 * (1.0 - alpha / a) else -1
    state.w = state.w + eta * v
    state.signs.append(eta)
    return state


def euclidean_threshold(n, delta):
    """Constant threshold 1/2 + log(4n/delta)."""
    return 0.5 + math.log(4.0 * n / delta)


def euclidean_bound(n, d, delta):
    """High-probability bound sqrt(2 log(4d/delta) log(4n/delta)) on |w|_inf."""
    return math.sqrt(2.0 * math.log(4.0 * d / delta) * math.log(4.0 * n / delta))


def balance_vectors(V, delta, seed=None):
    """Online Euclidean vector balancing with the constant threshold.

    Args:
      V: (n, d) array of vectors with Euclidean norm at most 1.
      delta: failure probability in (0, 1].
      seed: seed or ``numpy.random.Generator``.

    Returns:
      (signs, w_final, exceeded); ``signs`` holds +1/-1 per vector and 0 for
      steps that took the exceed branch.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("V must be an (n, d) array")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms > 1 + 1e-12):
        raise ValueError(f"vector {int(np.argmax(norms))} has norm {norms.max():.6g} > 1")
    n, d = V.shape
    rng = np.random.default_rng(seed)
    uniforms = rng.random(n)
    a = euclidean_threshold(n, delta)
    state = EuclideanWalkState.start(d)
    for i in range(n):
        sbw_step(state, V[i], a, uniforms[i])
    return np.array(state.signs, dtype=int), state.w, state.exceeded


def signed_sum(signs, V):
    """sum_i signs[i] * V[i], accumulated in input order."""
    w = np.zeros(np.asarray(V).shape[1])
    for s, v in zip(signs, V):
        w = w + s * np.asarray(v, dtype=float)
    return w


def update_subgaussian(sigma_sq, f_norm_sq, a):
    """One step of the sub-Gaussian constant recursion.

    sigma_i^2 = sigma_{i-1}^2 + |f|^2 (1 + sigma_{i-1}^2 (|f|^2 - 2a) / a^2)_+
    """
    if not a > 0:
        raise ValueError("threshold must be positive")
    factor = 1.0 + sigma_sq * (f_norm_sq - 2.0 * a) / (a * a)
    return sigma_sq + f_norm_sq * max(factor, 0.0)


def adaptive_sigma_bound(max_f_norm_sq, c_star):
    """Upper bound max|f|^2 / 4 * (c* + 1/c*)^2 on the final sigma^2."""
    return 0.25 * max_f_norm_sq * (c_star + 1.0 / c_star) ** 2

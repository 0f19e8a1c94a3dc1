"""Kernel thinning: recursive randomized halving, then greedy MMD refinement.

``kt_split`` streams the input and repeatedly halves it into 2**m candidate
coresets using the square-root kernel. ``kt_swap`` picks the candidate (or a
baseline) closest to the input in MMD for the target kernel, then replaces
each coreset point by the input point that most reduces that MMD.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .balance import adaptive_sigma_bound, update_subgaussian
from .kernels import as_points, kernel_matrix, sqrt_kernel_of
from .mmd import MmdWorkspace

FIXED = "fixed"
ANYTIME = "anytime"
UNIFORM = "uniform"

MAIN = "main"
JOURNAL = "journal"


@dataclass(frozen=True)
class DeltaSchedule:
    """Per-pair failure probabilities delta_i.

    * ``fixed``:   delta / (2 (n - n / 2**m)), for a known stopping time n
    * ``anytime``: delta / (4 m (i+1) log^2(i+1))
    * ``uniform``: delta / (2 n)
    """

    kind: str
    delta: float
    n: int = None
    m: int = None

    def __post_init__(self):
        if self.kind not in (FIXED, ANYTIME, UNIFORM):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.kind in (FIXED, UNIFORM) and (self.n is None or self.n < 2):
            raise ValueError(f"{self.kind} schedule needs the input size n >= 2")
        if self.kind in (FIXED, ANYTIME) and (self.m is None or self.m < 1):
            raise ValueError(f"{self.kind} schedule needs the thinning parameter m >= 1")

    @classmethod
    def fixed(cls, delta, n, m):
        return cls(FIXED, delta, n=n, m=m)

    @classmethod
    def anytime(cls, delta, m):
        return cls(ANYTIME, delta, m=m)

    @classmethod
    def uniform(cls, delta, n):
        return cls(UNIFORM, delta, n=n)


def delta_at(schedule, i):
    """delta_i for the i-th pair (1-based)."""
    if i < 1:
        raise ValueError("schedule index starts at 1")
    if schedule.kind == FIXED:
        if i > schedule.n // 2:
            raise ValueError(f"index {i} exceeds n/2 = {schedule.n // 2}")
        return schedule.delta / (2.0 * (schedule.n - schedule.n / 2 ** schedule.m))
    if schedule.kind == UNIFORM:
        return schedule.delta / (2.0 * schedule.n)
    return schedule.delta / (4.0 * schedule.m * (i + 1) * math.log(i + 1) ** 2)


def get_swap_params(sigma_sq, b_sq, delta, log_const=4.0):
    """Swap threshold and updated sub-Gaussian constant for one halving step.

    a = max(sqrt(b^2 sigma^2 * 2 log(log_const / delta)), b^2); the constant
    then follows the sub-Gaussian recursion. For b^2 = 0 the pair is
    degenerate: a = 0 and sigma^2 is returned unchanged.
    """
    if b_sq <= 0.0:
        return 0.0, sigma_sq
    lt = max(2.0 * math.log(log_const / delta), 0.0)
    a = max(math.sqrt(b_sq * sigma_sq * lt), b_sq)
    return a, update_subgaussian(sigma_sq, b_sq, a)


@dataclass
class Coreset:
    """Ordered indices into the input points."""

    indices: np.ndarray
    provenance: str
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.indices)


class Failure:
    """Returned by ``kernel_halving`` when a threshold was exceeded."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FAILURE"

    def __bool__(self):
        return False


FAILURE = Failure()


@dataclass
class SplitState:
    """All intermediate coresets and swap parameters of one ``kt_split`` run.

    ``levels[j]`` is a (2**j, n_used / 2**j) array whose row l is the coreset
    S_{j, l+1}; ``sigma_sq[j-1]`` and ``max_b_sq[j-1]`` hold one entry per
    parent coreset at level j-1.
    """

    levels: list
    sigma_sq: list
    max_b_sq: list
    c_star: list
    n_used: int
    dropped: int
    kernel_evals: int

    @property
    def m(self):
        return len(self.levels) - 1

    def check_partition(self):
        final = np.sort(self.levels[-1].ravel())
        if not np.array_equal(final, np.arange(self.n_used)):
            raise AssertionError("level-m coresets do not partition the input")

    def check_level_consistency(self):
        for j in range(1, self.m + 1):
            parents = self.levels[j - 1]
            children = self.levels[j]
            for ell in range(parents.shape[0]):
                merged = np.sort(np.concatenate([children[2 * ell], children[2 * ell + 1]]))
                if not np.array_equal(merged, np.sort(parents[ell])):
                    raise AssertionError(f"children of S_({j - 1},{ell + 1}) do not split their parent")

    def check_sigma_bound(self, rtol=1e-12):
        for j in range(self.m):
            c = self.c_star[j]
            if c <= 0:
                continue
            bound = np.array([adaptive_sigma_bound(b, c) for b in self.max_b_sq[j]])
            if np.any(self.sigma_sq[j] < 0) or np.any(self.sigma_sq[j] > bound * (1 + rtol)):
                raise AssertionError(f"sub-Gaussian constants at level {j + 1} violate the adaptive bound")

    def check_invariants(self):
        self.check_partition()
        self.check_level_consistency()
        self.check_sigma_bound()


def _split_size(n, m, strict):
    if m < 1:
        raise ValueError("thinning parameter m must be at least 1")
    block = 1 << m
    if n < block:
        raise ValueError(f"need at least 2**m = {block} points, got {n}")
    rem = n % block
    if rem and strict:
        raise ValueError(f"n = {n} is not divisible by 2**m = {block}")
    if rem:
        warnings.warn(f"dropping the final {rem} points so that 2**m divides n", RuntimeWarning, stacklevel=3)
    return n - rem


def _log_terms(schedule, m, pairs, variant):
    if variant not in (MAIN, JOURNAL):
        raise ValueError(f"unknown threshold variant {variant!r}")
    deltas = [delta_at(schedule, t) for t in range(1, pairs + 1)]
    out = np.zeros((m, pairs))
    for j in range(1, m + 1):
        used = pairs >> (j - 1)
        for t in range(used):
            if variant == MAIN:
                val = 2.0 * math.log(4.0 / deltas[t])
            else:
                val = 2.0 * math.log(2.0 / (deltas[t] * 2 ** (j - 1) / m))
            out[j - 1, t] = max(val, 0.0)
    return out


def kt_split(krt, points, m, schedule, seed=None, strict=False, threshold_variant=MAIN):
    """Divide the input into 2**m candidate coresets of size floor(n / 2**m).

    Args:
      krt: square-root kernel driving the halving decisions.
      points: (n, d) input sequence; order matters.
      m: number of halving rounds.
      schedule: ``DeltaSchedule`` giving the per-pair failure probabilities.
      seed: seed or ``numpy.random.Generator``; one uniform is drawn per
        halving decision, in streaming order.
      strict: reject n not divisible by 2**m instead of dropping the tail.
      threshold_variant: ``"main"`` uses log(4/delta_t); ``"journal"`` uses
        log(2/delta') with delta' = delta_t 2**(j-1) / m at level j.

    Returns:
      (candidates, state): the 2**m level-m coresets and the ``SplitState``.
    """
    X = as_points(points, krt.dim)
    n = X.shape[0]
    n_used = _split_size(n, m, strict)
    pairs = n_used // 2
    log_terms = _log_terms(schedule, m, pairs, threshold_variant)
    rng = np.random.default_rng(seed)
    uniforms = rng.random(m * pairs)
    levels, sigma_sq, max_b_sq, evals = _backend.get().kt_split_core(
        krt.packed, np.ascontiguousarray(X[:n_used]), int(m), log_terms, uniforms
    )
    c_star = [
        math.sqrt(float(log_terms[j, : pairs >> j].max())) if pairs >> j else 0.0 for j in range(m)
    ]
    state = SplitState(levels, sigma_sq, max_b_sq, c_star, n_used, n - n_used, int(evals))
    candidates = [Coreset(levels[m][ell].copy(), f"split:{ell + 1}") for ell in range(1 << m)]
    return candidates, state


def standard_thin(n, out_size, strict=False):
    """Keep every t-th point, t = floor(n / out_size), ending on the final point."""
    if out_size < 1:
        raise ValueError("output size must be positive")
    if out_size > n:
        raise ValueError(f"cannot keep {out_size} of {n} points")
    if strict and n % out_size:
        raise ValueError(f"n = {n} is not divisible by {out_size}")
    step = n // out_size
    idx = np.arange(1, out_size + 1, dtype=np.int64) * step - 1
    idx[-1] = n - 1
    return Coreset(idx, "baseline")


def kt_swap(k, points, candidates, baseline, workspace=None):
    """Select the best coreset by MMD to the input, then refine it point by point.

    The baseline competes with the candidates; ties favour the baseline, then
    the lowest candidate. Each coreset slot in turn is replaced by the input
    point giving the smallest MMD, keeping the incumbent unless the
    improvement is above rounding level. Duplicate points may result.
    """
    X = as_points(points, k.dim)
    sizes = {len(c) for c in candidates} | {len(baseline)}
    if len(sizes) != 1:
        raise ValueError(f"candidate coresets differ in size: {sorted(sizes)}")
    s = sizes.pop()
    if s < 1:
        raise ValueError("coresets must be non-empty")
    ws = workspace if workspace is not None else MmdWorkspace(k, X)

    pool = [baseline] + list(candidates)
    scores = [ws.mmd_sq(c.indices) for c in pool]
    best = 0
    for i, v in enumerate(scores):
        if v < scores[best]:
            best = i
    chosen = pool[best]

    ws.set_coreset(chosen.indices)
    trace = [ws.current_mmd_sq()]
    tol = 1e-12 * k.scale / s
    for pos in range(s):
        p = int(ws.coreset[pos])
        col_p = ws.kernel_column(p)
        deltas = ws.swap_deltas(pos, col_p)
        z = int(np.argmin(deltas))
        if deltas[z] < -tol:
            ws.apply_swap(pos, z, col_p, ws.kernel_column(z))
        trace.append(ws.current_mmd_sq())

    info = {
        "selected": chosen.provenance,
        "candidate_mmd_sq": dict(zip((c.provenance for c in pool), scores)),
        "swap_trace_mmd_sq": trace,
        "kernel_evals": ws.kernel_evals,
    }
    return Coreset(ws.coreset.copy(), "swapped", info)


def kernel_thinning(k, krt, points, m, schedule=None, seed=None, strict=False, threshold_variant=MAIN,
                    baseline=None, delta=0.5):
    """Compress n points to floor(n / 2**m) points with small MMD to the input.

    Args:
      k: target kernel used for selection and refinement.
      krt: square-root kernel for splitting; ``None`` derives it from ``k``.
      points: (n, d) input sequence.
      m: thinning parameter.
      schedule: ``DeltaSchedule``; defaults to the fixed-n schedule with ``delta``.
      seed: seed or ``numpy.random.Generator``.
      strict: require 2**m to divide n.
      threshold_variant: see ``kt_split``.
      baseline: baseline ``Coreset``; defaults to standard thinning.
    """
    X = as_points(points, k.dim)
    n = X.shape[0]
    if krt is None:
        krt = sqrt_kernel_of(k)
    if schedule is None:
        schedule = DeltaSchedule.fixed(delta, n, m)
    candidates, state = kt_split(krt, X, m, schedule, seed, strict=strict, threshold_variant=threshold_variant)
    size = state.n_used >> m
    if baseline is None:
        baseline = standard_thin(n, size)
    out = kt_swap(k, X, candidates, baseline)
    out.info["split_state"] = state
    out.info["kernel_evals"] = out.info["kernel_evals"] + state.kernel_evals
    return out


def kernel_halving(k, points, deltas, seed=None):
    """Halve the input with the self-balancing walk over kernel differences.

    Pair i contributes f_i = k(x_{2i-1}, .) - k(x_{2i}, .); the walk's
    threshold comes from ``get_swap_params`` with probability 2 delta_i. While
    every |alpha_i| stays below its threshold the inner product has an
    explicit kernel-sum form; once exceeded the walk keeps its corrected
    state and the call returns ``FAILURE``. One uniform is consumed per pair.

    Returns:
      ``Coreset`` of the n/2 retained points, or ``FAILURE``.
    """
    X = as_points(points, k.dim)
    n = X.shape[0]
    if n % 2:
        raise ValueError("kernel halving needs an even number of points")
    half = n // 2
    deltas = np.asarray(deltas, dtype=float)
    if deltas.shape != (half,):
        raise ValueError(f"expected {half} probabilities, got {deltas.shape}")
    rng = np.random.default_rng(seed)
    uniforms = rng.random(half)
    packed = k.packed
    backend = _backend.get()
    diag = backend.kernel_diag(packed, X)
    coef = np.zeros(n)
    kept = np.empty(half, dtype=np.int64)
    failed = False
    sigma_sq = 0.0
    for i in range(half):
        x, xp = 2 * i, 2 * i + 1
        K = backend.kernel_matrix(packed, X[: 2 * i + 2], X[[x, xp]])
        b_sq = max(diag[x] + diag[xp] - 2.0 * K[x, 1], 0.0)
        a, sigma_sq = get_swap_params(sigma_sq, b_sq, 2.0 * deltas[i])
        diff = K[:, 0] - K[:, 1]
        if failed:
            alpha = float(np.dot(coef[: 2 * i + 2], diff))
        else:
            alpha = float(np.sum(diff[: 2 * i]))
            if i:
                alpha -= 2.0 * float(np.sum(diff[kept[:i]]))
        u = uniforms[i]
        if b_sq > 0.0 and abs(alpha) > a:
            failed = True
            coef[x] -= alpha / a
            coef[xp] += alpha / a
            kept[i] = -1
            continue
        prob = 0.5 * (1.0 - alpha / a) if b_sq > 0.0 else 0.5
        eta = -1
        if u < prob:
            x, xp = xp, x
            eta = 1
        kept[i] = x
        coef[2 * i] += eta
        coef[2 * i + 1] -= eta
    if failed:
        return FAILURE
    return Coreset(kept, "halving")

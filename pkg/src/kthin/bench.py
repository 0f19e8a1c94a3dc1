"""Seeded sweeps comparing kernel thinning with standard thinning.

For every input size n (a power of 4) and replication, an input sequence of n
points is drawn, thinned to sqrt(n) points by each method, and scored by MMD
either to the target distribution (closed form) or to the input itself.
Results aggregate to one row per (method, n); a log-log OLS fit of mean MMD
against n gives each method's empirical decay rate.

Random streams: the input for (n, rep) is seeded by SeedSequence([seed, n,
rep]); kernel thinning's own randomness by SeedSequence([seed, n, rep, 1]).
"""
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, as_points, median_heuristic
from .mmd import mmd_to_input, mmd_to_target, MmdWorkspace, target_mean_embedding, target_self_embedding
from .special import bspline_univariate
from .targets import TargetSpec, sample_target
from .thinning import DeltaSchedule, kernel_thinning, standard_thin

log = logging.getLogger(__name__)

KT = "kt"
STANDARD = "standard-thin"
METHOD_ALIASES = {"iid": STANDARD, "standard": STANDARD, STANDARD: STANDARD, KT: KT}

DEFAULT_SIZES = tuple(4 ** p for p in range(2, 8))


class OracleGateError(RuntimeError):
    """A numerical oracle disagreed with a closed form the bench relies on."""


@dataclass
class ExperimentConfig:
    """Sweep description.

    ``kernel`` is ``"sigma2=2d"`` (sigma^2 = 2d), ``"median"`` (median
    heuristic on each input) or a positive float bandwidth sigma.
    ``report`` is ``"target"`` or ``"input"``. Supplying ``points`` instead of
    ``target`` uses the first n rows of that array as the input for size n.
    """

    target: TargetSpec = None
    points: np.ndarray = None
    kernel: object = "sigma2=2d"
    sizes: tuple = DEFAULT_SIZES
    reps: int = 10
    delta: float = 0.5
    methods: tuple = (STANDARD, KT)
    report: str = "target"
    seed: int = 0
    slope_min_n: int = 4 ** 3
    threshold_variant: str = "main"
    workers: int = 1
    delta_prime: float = field(default=None)

    def __post_init__(self):
        if (self.target is None) == (self.points is None):
            raise ValueError("give exactly one of target or points")
        self.methods = tuple(METHOD_ALIASES[m] for m in self.methods)
        for n in self.sizes:
            p = round(math.log(n, 4))
            if 4 ** p != n or n < 4:
                raise ValueError(f"input size {n} is not a power of 4")
        if self.reps < 2:
            raise ValueError("need at least two replications for standard errors")
        if self.report not in ("target", "input"):
            raise ValueError("report must be 'target' or 'input'")
        if self.report == "target" and self.target is None:
            raise ValueError("reporting MMD to the target needs a target distribution")
        if self.points is not None:
            self.points = as_points(self.points)
            if max(self.sizes) > self.points.shape[0]:
                raise ValueError("input file has fewer rows than the largest size")
        if self.delta_prime is None:
            self.delta_prime = self.delta / 2.0

    @property
    def dim(self):
        return self.target.dim if self.target is not None else self.points.shape[1]


@dataclass
class ResultRow:
    method: str
    n: int
    coreset_size: int
    mean_mmd: float
    stderr_mmd: float
    wall_time: float


def thinning_parameter(n):
    """m = log2(n) / 2, so the coreset has sqrt(n) points."""
    m = math.log2(n) / 2.0
    if not m.is_integer():
        raise ValueError(f"log2({n}) / 2 is not an integer")
    return int(m)


def _input_for(config, n, rep):
    if config.points is not None:
        return config.points[:n]
    return sample_target(config.target, n, np.random.SeedSequence([config.seed, n, rep]))


def _kernel_for(config, X):
    d = X.shape[1]
    if config.kernel == "sigma2=2d":
        return KernelSpec.gaussian(d, math.sqrt(2.0 * d))
    if config.kernel == "median":
        sigma = median_heuristic(X)
        if sigma <= 0:
            raise ValueError("median heuristic produced a zero bandwidth")
        return KernelSpec.gaussian(d, sigma)
    return KernelSpec.gaussian(d, float(config.kernel))


def _one_run(config, n, rep):
    """MMD and wall time per method for one (n, rep) cell."""
    X = _input_for(config, n, rep)
    k = _kernel_for(config, X)
    m = thinning_parameter(n)
    size = n >> m
    ws = MmdWorkspace(k, X) if config.report == "input" else None
    out = {}
    for method in config.methods:
        start = time.perf_counter()
        if method == STANDARD:
            core = standard_thin(n, size)
        else:
            schedule = DeltaSchedule.uniform(config.delta, n)
            core = kernel_thinning(k, None, X, m, schedule, seed=np.random.SeedSequence([config.seed, n, rep, 1]),
                                   threshold_variant=config.threshold_variant)
        elapsed = time.perf_counter() - start
        if config.report == "target":
            score = mmd_to_target(k, config.target, X[core.indices])
        else:
            score = mmd_to_input(ws, core)
        out[method] = (score, elapsed, len(core))
    return n, rep, out


def _worker_count(config):
    env = os.environ.get("KT_THREADS")
    if env is not None:
        w = int(env)
        return os.cpu_count() or 1 if w == 0 else max(1, w)
    return max(1, config.workers)


def run_experiment(config):
    """Run the sweep and return one ``ResultRow`` per (method, n)."""
    if config.report == "target":
        ensure_oracles(config)
    cells = [(n, rep) for n in config.sizes for rep in range(config.reps)]
    workers = _worker_count(config)
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_one_run, config, n, rep) for n, rep in cells]
            for fut in futures:
                n, rep, out = fut.result()
                results[n, rep] = out
    else:
        for n, rep in cells:
            try:
                results[n, rep] = _one_run(config, n, rep)[2]
            except Exception as exc:
                raise RuntimeError(f"replication {rep} at n={n} failed: {exc}") from exc
            log.debug("n=%d rep=%d done", n, rep)

    rows = []
    for method in config.methods:
        for n in config.sizes:
            scores = np.array([results[n, rep][method][0] for rep in range(config.reps)])
            wall = float(sum(results[n, rep][method][1] for rep in range(config.reps)))
            size = results[n, 0][method][2]
            rows.append(ResultRow(method, n, size, float(scores.mean()),
                                  float(scores.std(ddof=1) / math.sqrt(config.reps)), wall))
    return rows


def fit_loglog_slope(rows, min_n=None):
    """OLS slope of log(mean MMD) against log(n) for a single method's rows."""
    pts = [(r.n, r.mean_mmd) for r in rows if min_n is None or r.n >= min_n]
    if any(v <= 0 for _, v in pts):
        raise ValueError("mean MMD values must be positive for a log-log fit")
    if len({n for n, _ in pts}) < 3:
        raise ValueError("need at least three distinct input sizes")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def slopes_by_method(rows, min_n=None):
    methods = dict.fromkeys(r.method for r in rows)
    return {m: fit_loglog_slope([r for r in rows if r.method == m], min_n) for m in methods}


# Oracle gates -------------------------------------------------------------

_passed_gates = set()


def check_embedding_oracle(k, target, draws=10 ** 6, rtol=1e-2, seed=12345, chunk=10 ** 5):
    """Monte Carlo check of the closed-form P k and P P k for a target.

    Returns the worst relative error; raises ``OracleGateError`` above ``rtol``.
    """
    rng = np.random.default_rng(seed)
    probes = np.vstack([target.component_means()[:1], sample_target(target, 3, rng)])
    closed_pk = target_mean_embedding(k, target, probes)
    closed_ppk = target_self_embedding(k, target)
    inv = 1.0 / (2.0 * k.sigma ** 2)
    acc_pk = np.zeros(len(probes))
    acc_ppk = 0.0
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        A = sample_target(target, b, rng)
        B = sample_target(target, b, rng)
        for i, y in enumerate(probes):
            acc_pk[i] += np.exp(-inv * ((A - y) ** 2).sum(axis=1)).sum()
        acc_ppk += np.exp(-inv * ((A - B) ** 2).sum(axis=1)).sum()
        done += b
    mc_pk = k.scale * acc_pk / draws
    mc_ppk = k.scale * acc_ppk / draws
    worst = max(float(np.max(np.abs(mc_pk / closed_pk - 1))), abs(mc_ppk / closed_ppk - 1))
    if worst > rtol:
        raise OracleGateError(f"mean-embedding closed form off by {worst:.3g} relative for {target.label}")
    return worst


def check_bspline_oracle(orders=(3, 4, 5, 6), grid=np.linspace(-3.0, 3.0, 25), step=1e-3, atol=1e-5):
    """Compare B-spline values against repeated numeric convolution of the indicator."""
    h = step
    z = np.round(np.arange(-8.0, 8.0 + h / 2, h) / h) * h
    box = (np.abs(z) < 0.5 - h / 2).astype(float)
    box[np.abs(np.abs(z) - 0.5) <= h / 2] = 0.5
    cur = box.copy()
    worst = 0.0
    for order in range(2, max(orders) + 1):
        cur = np.convolve(cur, box, mode="same") * h
        if order in orders:
            numeric = np.interp(grid, z, cur)
            exact = bspline_univariate(order, grid)
            worst = max(worst, float(np.max(np.abs(numeric - exact))))
    if worst > atol:
        raise OracleGateError(f"B-spline closed form off by {worst:.3g} from numeric convolution")
    return worst


def ensure_oracles(config):
    """Run (once per process) the oracle checks a target-MMD sweep depends on."""
    d = config.dim
    probe = _kernel_for(config, np.zeros((1, d))) if config.kernel != "median" else None
    key = (config.target.label, None if probe is None else probe.sigma)
    if key in _passed_gates:
        return
    if "bspline" not in _passed_gates:
        check_bspline_oracle()
        _passed_gates.add("bspline")
    if probe is not None:
        check_embedding_oracle(probe, config.target)
    _passed_gates.add(key)

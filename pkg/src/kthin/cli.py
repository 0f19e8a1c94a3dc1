"""Command-line interface: ``kthin thin | bench | mmd | median-bandwidth | balance-demo``.

Exit status is 0 on success, 2 for invalid arguments or inputs and 1 for
any other failure; errors print a one-line diagnostic to stderr.
"""
import argparse
import logging
import math
import sys

import numpy as np

from . import _backend
from .balance import balance_vectors, euclidean_bound
from .bench import ExperimentConfig, run_experiment, slopes_by_method, thinning_parameter
from .io import format_indices, format_results, read_points, write_results
from .kernels import KernelSpec, median_heuristic
from .mmd import mmd_sq_empirical
from .targets import TargetSpec, sample_target
from .thinning import DeltaSchedule, kernel_thinning

log = logging.getLogger("kthin")


class ArgumentError(ValueError):
    pass


def _fields(text, what):
    """Split ``name:key=val,key=val`` into (name, {key: val})."""
    name, _, rest = text.partition(":")
    opts = {}
    for part in filter(None, rest.split(",")):
        key, eq, val = part.partition("=")
        if not eq:
            raise ArgumentError(f"malformed {what} option {part!r} in {text!r}")
        opts[key.strip()] = val.strip()
    return name.strip(), opts


def parse_target(text, as_printed=False):
    name, opts = _fields(text, "target")
    try:
        if name == "gaussian":
            return TargetSpec.std_gaussian(int(opts["d"]))
        if name == "mog":
            return TargetSpec.mixture(int(opts.get("M", 4)), as_printed=as_printed)
    except KeyError as exc:
        raise ArgumentError(f"target {text!r} is missing {exc.args[0]}") from None
    raise ArgumentError(f"unknown target {text!r}; use gaussian:d=K or mog:M=K")


def parse_kernel(text, dim, points=None):
    """Resolve a kernel flag for d-dimensional data.

    Accepted forms: ``gaussian:sigma=<f>``, ``gaussian:sigma2=2d``, ``median``,
    ``matern:nu=<f>,gamma=<f>`` and ``bspline:degree=<int>``.
    """
    if text == "median":
        if points is None:
            raise ArgumentError("the median kernel needs input points")
        sigma = median_heuristic(points)
        if sigma <= 0:
            raise ArgumentError("median heuristic gave a zero bandwidth")
        return KernelSpec.gaussian(dim, sigma)
    name, opts = _fields(text, "kernel")
    try:
        if name == "gaussian":
            if opts.get("sigma2") == "2d":
                return KernelSpec.gaussian(dim, math.sqrt(2.0 * dim))
            if "sigma2" in opts:
                return KernelSpec.gaussian(dim, math.sqrt(float(opts["sigma2"])))
            return KernelSpec.gaussian(dim, float(opts["sigma"]))
        if name == "matern":
            return KernelSpec.matern(dim, float(opts["nu"]), float(opts.get("gamma", 1.0)))
        if name == "bspline":
            return KernelSpec.bspline(dim, int(opts["degree"]))
    except KeyError as exc:
        raise ArgumentError(f"kernel {text!r} is missing {exc.args[0]}") from None
    raise ArgumentError(f"unknown kernel {text!r}")


def _resolve_m(args, n):
    if args.m is not None:
        return args.m
    if args.m_rule == "half-log2":
        try:
            return thinning_parameter(n)
        except ValueError:
            raise ArgumentError(f"--m-rule half-log2 needs log2(n)/2 integral (n={n})") from None
    raise ArgumentError("give --m or --m-rule")


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_thin(args):
    if (args.input is None) == (args.target is None):
        raise ArgumentError("give exactly one of --input or --target")
    if args.input is not None:
        X = read_points(args.input)
        n = args.n if args.n is not None else X.shape[0]
        if n > X.shape[0]:
            raise ArgumentError(f"--n {n} exceeds the {X.shape[0]} rows in {args.input}")
        X = X[:n]
        source = args.input
    else:
        if args.n is None:
            raise ArgumentError("--target needs --n")
        n = args.n
        target = parse_target(args.target, args.means_as_printed)
        X = sample_target(target, n, np.random.SeedSequence([args.seed, 0]))
        source = target.label
    m = _resolve_m(args, n)
    if m < 1 or n < (1 << m):
        raise ArgumentError(f"need m >= 1 and n >= 2**m (n={n}, m={m})")
    if args.strict and n % (1 << m):
        raise ArgumentError(f"n = {n} is not divisible by 2**m = {1 << m}")
    k = parse_kernel(args.kernel, X.shape[1], X)
    if args.schedule == "fixed":
        schedule = DeltaSchedule.fixed(args.delta, n, m)
    elif args.schedule == "anytime":
        schedule = DeltaSchedule.anytime(args.delta, m)
    else:
        schedule = DeltaSchedule.uniform(args.delta, n)
    core = kernel_thinning(k, None, X, m, schedule, seed=np.random.SeedSequence([args.seed, 1]),
                           strict=args.strict, threshold_variant=args.threshold_variant)
    meta = {
        "source": source, "n": n, "m": m, "kernel": k.family, "params": _kernel_params(k),
        "delta": args.delta, "schedule": args.schedule, "threshold_variant": args.threshold_variant,
        "seed": args.seed, "strict": args.strict, "backend": _backend.name(), "selected": core.info["selected"],
    }
    _emit(format_indices(core.indices, meta), args.output)
    return 0


def _kernel_params(k):
    if k.family == "gaussian":
        return f"sigma={k.sigma!r}"
    if k.family == "matern":
        return f"nu={k.nu!r};gamma={k.gamma!r}"
    return f"degree={k.degree}"


def _parse_sizes(text):
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise ArgumentError(f"--sizes must be comma-separated integers, got {text!r}") from None


def cmd_bench(args):
    if (args.input is None) == (args.target is None):
        raise ArgumentError("give exactly one of --input or --target")
    kernel = args.kernel
    if kernel.startswith("gaussian:"):
        name, opts = _fields(kernel, "kernel")
        if opts.get("sigma2") == "2d":
            kernel = "sigma2=2d"
        elif "sigma" in opts:
            kernel = float(opts["sigma"])
        else:
            raise ArgumentError(f"unsupported bench kernel {args.kernel!r}")
    elif kernel != "median":
        raise ArgumentError("bench kernels are gaussian:sigma=<f>, gaussian:sigma2=2d or median")
    config = ExperimentConfig(
        target=parse_target(args.target, args.means_as_printed) if args.target else None,
        points=read_points(args.input) if args.input else None,
        kernel=kernel,
        sizes=_parse_sizes(args.sizes),
        reps=args.reps,
        delta=args.delta,
        methods=tuple(args.methods.split(",")),
        report=args.report,
        seed=args.seed,
        slope_min_n=args.slope_min_n,
        threshold_variant=args.threshold_variant,
    )
    rows = run_experiment(config)
    if args.output:
        write_results(args.output, rows)
    else:
        sys.stdout.write(format_results(rows))
    for method, slope in slopes_by_method(rows, config.slope_min_n).items():
        print(f"slope({method}) = {slope:.6f}")
    return 0


def cmd_mmd(args):
    X = read_points(args.x)
    Y = read_points(args.y)
    if X.shape[1] != Y.shape[1]:
        raise ArgumentError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    k = parse_kernel(args.kernel, X.shape[1], np.vstack([X, Y]))
    val = mmd_sq_empirical(k, X, Y)
    print(format(val if args.squared else math.sqrt(val), ".17g"))
    return 0


def cmd_median_bandwidth(args):
    print(format(median_heuristic(read_points(args.input), args.max_points), ".17g"))
    return 0


def cmd_balance_demo(args):
    """Balance n random unit vectors in R^d and compare against the high-probability bound."""
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0]))
    V = rng.standard_normal((args.n, args.d))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    _, w, exceeded = balance_vectors(V, args.delta, np.random.SeedSequence([args.seed, 1]))
    print(f"linf_norm = {np.max(np.abs(w)):.17g}")
    print(f"bound = {euclidean_bound(args.n, args.d, args.delta):.17g}")
    print(f"exceeded = {str(bool(exceeded)).lower()}")
    return 0


def _unit_interval(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="kthin", description="Kernel thinning of point sequences.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--backend", choices=sorted(_backend.BACKENDS), help="kernel backend (default: fastest available)")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("thin", help="compress a point sequence")
    t.add_argument("--input")
    t.add_argument("--target", help="gaussian:d=K or mog:M=K")
    t.add_argument("--means-as-printed", action="store_true")
    t.add_argument("--n", type=int)
    mg = t.add_mutually_exclusive_group()
    mg.add_argument("--m", type=int)
    mg.add_argument("--m-rule", choices=["half-log2"])
    t.add_argument("--kernel", default="gaussian:sigma2=2d")
    t.add_argument("--delta", type=_unit_interval, default=0.5)
    t.add_argument("--schedule", choices=["fixed", "anytime", "uniform"], default="fixed")
    t.add_argument("--threshold-variant", choices=["main", "journal"], default="main")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--strict", action="store_true")
    t.add_argument("--output")
    t.set_defaults(func=cmd_thin)

    b = sub.add_parser("bench", help="sweep input sizes and fit decay slopes")
    b.add_argument("--target")
    b.add_argument("--input")
    b.add_argument("--means-as-printed", action="store_true")
    b.add_argument("--sizes", default="16,64,256,1024,4096,16384")
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--methods", default="standard-thin,kt")
    b.add_argument("--report", choices=["target", "input"], default="target")
    b.add_argument("--kernel", default="gaussian:sigma2=2d")
    b.add_argument("--delta", type=_unit_interval, default=0.5)
    b.add_argument("--threshold-variant", choices=["main", "journal"], default="main")
    b.add_argument("--slope-min-n", type=int, default=64)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--output")
    b.set_defaults(func=cmd_bench)

    mm = sub.add_parser("mmd", help="MMD between two point files")
    mm.add_argument("--x", required=True)
    mm.add_argument("--y", required=True)
    mm.add_argument("--kernel", required=True)
    mm.add_argument("--squared", action="store_true")
    mm.set_defaults(func=cmd_mmd)

    md = sub.add_parser("median-bandwidth", help="median pairwise distance")
    md.add_argument("--input", required=True)
    md.add_argument("--max-points", type=int, default=4 ** 7)
    md.set_defaults(func=cmd_median_bandwidth)

    bd = sub.add_parser("balance-demo", help="self-balancing walk on random unit vectors")
    bd.add_argument("--n", type=int, default=256)
    bd.add_argument("--d", type=int, default=16)
    bd.add_argument("--delta", type=float, default=0.5)
    bd.add_argument("--seed", type=int, default=0)
    bd.set_defaults(func=cmd_balance_demo)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.backend:
            _backend.use(args.backend)
        return args.func(args)
    except ValueError as exc:
        print(f"kthin {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"kthin {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

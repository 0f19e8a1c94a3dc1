"""Kernel thinning and the self-balancing Hilbert walk."""
from .kernels import (
    KernelSpec,
    eval_kernel,
    kernel_matrix,
    median_heuristic,
    sqrt_kernel_of,
    verify_sqrt_identity,
)
from .special import bessel_k, bspline_univariate

__version__ = "0.1.0"

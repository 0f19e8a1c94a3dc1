"""Synthetic target distributions: standard Gaussian and Gaussian mixtures.

Sampling uses numpy's PCG64 generator. A mixture draw consumes one uniform
(the component, floor(u * M)) followed by d standard normals from the
generator's ziggurat sampler; all n uniforms are drawn before the normals.
"""
from dataclasses import dataclass

import numpy as np

MEANS_TABLE = np.array(
    [[-3.0, 3.0], [3.0, 3.0], [-3.0, -3.0], [3.0, -3.0], [0.0, 6.0], [-6.0, 0.0], [6.0, 0.0], [0.0, -6.0]]
)

# verbatim published list; its second entry repeats the first
MEANS_TABLE_AS_PRINTED = MEANS_TABLE.copy()
MEANS_TABLE_AS_PRINTED[1] = [-3.0, 3.0]


def default_means(M, as_printed=False):
    """First M component means of the mixture target (M in {4, 6, 8})."""
    if M not in (4, 6, 8):
        raise ValueError(f"mixture size must be 4, 6 or 8 (got {M})")
    table = MEANS_TABLE_AS_PRINTED if as_printed else MEANS_TABLE
    return table[:M].copy()


@dataclass(frozen=True)
class TargetSpec:
    """Target distribution: ``gaussian`` is N(0, I_d); ``mog`` mixes N(mu_j, I_2)."""

    kind: str
    dim: int
    means: tuple = None

    @classmethod
    def std_gaussian(cls, dim):
        if dim < 1:
            raise ValueError("dimension must be positive")
        return cls("gaussian", int(dim))

    @classmethod
    def mixture(cls, M=4, means=None, as_printed=False):
        mu = default_means(M, as_printed) if means is None else np.asarray(means, dtype=float)
        if mu.ndim != 2 or mu.shape[1] != 2:
            raise ValueError("mixture means must be an (M, 2) array")
        return cls("mog", 2, tuple(map(tuple, mu)))

    def component_means(self):
        if self.kind == "gaussian":
            return np.zeros((1, self.dim))
        return np.array(self.means, dtype=float)

    @property
    def label(self):
        return f"gaussian:d={self.dim}" if self.kind == "gaussian" else f"mog:M={len(self.means)}"


def sample_target(spec, n, seed=None):
    """Draw n i.i.d. points from the target."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    if spec.kind == "gaussian":
        return rng.standard_normal((n, spec.dim))
    means = spec.component_means()
    comp = np.floor(rng.random(n) * len(means)).astype(np.int64)
    return means[comp] + rng.standard_normal((n, spec.dim))


def sample_components(spec, n, seed=None):
    """Component labels that ``sample_target`` would use for the same seed."""
    rng = np.random.default_rng(seed)
    return np.floor(rng.random(n) * len(spec.component_means())).astype(np.int64)

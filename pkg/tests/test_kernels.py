import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special as sp
from scipy.spatial.distance import pdist

from kthin.exceptions import DegenerateBandwidthWarning, UnsupportedKernelError
from kthin.kernels import (
    KernelSpec,
    _median_pairwise_distance,
    _kth_pairwise_distances,
    eval_kernel,
    kernel_matrix,
    median_heuristic,
    sqrt_kernel_of,
    verify_sqrt_identity,
)
from kthin.special import bspline_univariate


def matern_reference(nu, gamma, d, r):
    b = nu - d / 2
    z = gamma * r
    if z == 0:
        return 1.0
    return 2 ** (1 - b) / sp.gamma(b) * z ** b * sp.kv(b, z)


def test_gaussian_values():
    assert eval_kernel(KernelSpec.gaussian(2, 1.0), [0, 0], [0, 0]) == 1.0
    assert eval_kernel(KernelSpec.gaussian(1, 1.0), [0.0], [math.sqrt(2)]) == pytest.approx(math.exp(-1), rel=1e-15)


def test_matern_half_order_is_exponential():
    k = KernelSpec.matern(1, 1.0, 1.0)
    assert k.matern_order == 0.5
    assert eval_kernel(k, [0.0], [2.0]) == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert eval_kernel(k, [0.0], [2.0]) == pytest.approx(0.1353353, abs=5e-8)


@pytest.mark.parametrize("nu,gamma,d", [(1.3, 0.7, 1), (2.0, 1.0, 1), (3.5, 2.0, 2), (4.0, 0.5, 3), (9.25, 1.5, 2)])
def test_matern_against_scipy(nu, gamma, d):
    k = KernelSpec.matern(d, nu, gamma)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, d)) * 2
    K = kernel_matrix(k, X)
    for i in range(6):
        for j in range(6):
            r = np.linalg.norm(X[i] - X[j])
            assert K[i, j] == pytest.approx(matern_reference(nu, gamma, d, r), rel=1e-11, abs=1e-300)


def test_bspline_kernel_is_normalised_product():
    k = KernelSpec.bspline(2, 3, scale=2.5)
    x, y = np.array([0.1, -0.4]), np.array([0.9, 0.3])
    f0 = bspline_univariate(4, 0.0)
    expected = 2.5 * np.prod([bspline_univariate(4, a) for a in x - y]) / f0 ** 2
    assert eval_kernel(k, x, y) == pytest.approx(expected, rel=1e-13)
    assert eval_kernel(k, x, x) == pytest.approx(2.5, rel=1e-14)
    assert eval_kernel(k, [0.0, 0.0], [3.0, 0.0]) == 0.0


@pytest.mark.parametrize(
    "k",
    [KernelSpec.gaussian(3, 0.8), KernelSpec.matern(3, 2.7, 1.3), KernelSpec.bspline(3, 3), KernelSpec.bspline(2, 1)],
    ids=["gauss", "matern", "bspline3", "bspline1"],
)
def test_kernel_matrix_symmetric_psd(k):
    X = np.random.default_rng(1).normal(size=(60, k.dim))
    K = kernel_matrix(k, X)
    assert np.array_equal(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-10


def test_validation_errors():
    with pytest.raises(ValueError):
        KernelSpec.gaussian(2, 0.0)
    with pytest.raises(ValueError):
        KernelSpec.matern(2, 1.0, 1.0)
    with pytest.raises(ValueError):
        KernelSpec.bspline(1, -1)
    with pytest.raises(ValueError):
        KernelSpec.gaussian(1, 1.0, scale=0.0)
    with pytest.raises(ValueError):
        eval_kernel(KernelSpec.gaussian(2, 1.0), [0.0], [0.0, 0.0])


def test_sqrt_gaussian_constant():
    rt = sqrt_kernel_of(KernelSpec.gaussian(2, math.sqrt(2)))
    assert rt.family == "gaussian"
    assert rt.sigma == pytest.approx(1.0, rel=1e-15)
    assert rt.scale == pytest.approx(1.0 / math.sqrt(math.pi), rel=1e-14)


def test_sqrt_matern_constant():
    rt = sqrt_kernel_of(KernelSpec.matern(1, 4.0, 1.0))
    expected = (1 / (4 * math.pi)) ** 0.25 * math.sqrt(sp.gamma(4) / sp.gamma(3.5)) * sp.gamma(1.5) / sp.gamma(2)
    assert (rt.nu, rt.gamma) == (2.0, 1.0)
    assert rt.scale == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sqrt_bspline_constant(d):
    rt = sqrt_kernel_of(KernelSpec.bspline(d, 3))
    s4 = bspline_univariate(4, 0.0) ** -d
    s2 = bspline_univariate(2, 0.0) ** -d
    assert rt.degree == 1
    assert rt.scale == pytest.approx(math.sqrt(s4) / s2, rel=1e-14)


def test_sqrt_partner_picks_up_root_of_target_scale():
    base = sqrt_kernel_of(KernelSpec.gaussian(2, 1.3))
    scaled = sqrt_kernel_of(KernelSpec.gaussian(2, 1.3, scale=9.0))
    assert scaled.scale == pytest.approx(3.0 * base.scale, rel=1e-14)


@pytest.mark.parametrize("k", [KernelSpec.matern(2, 2.0, 1.0), KernelSpec.bspline(1, 5), KernelSpec.bspline(1, 2)])
def test_sqrt_outside_range_rejected(k):
    with pytest.raises(UnsupportedKernelError):
        sqrt_kernel_of(k)


def test_sqrt_identity_examples():
    g = KernelSpec.gaussian(1, 1.0)
    assert verify_sqrt_identity(g, sqrt_kernel_of(g), [0.0], [0.0]) <= 1e-6
    b = KernelSpec.bspline(1, 3)
    assert verify_sqrt_identity(b, sqrt_kernel_of(b), [0.0], [0.3]) <= 1e-6
    m = KernelSpec.matern(1, 4.0, 1.0)
    assert verify_sqrt_identity(m, sqrt_kernel_of(m), [0.0], [1.0]) <= 1e-4


def test_sqrt_identity_two_dimensions():
    for k in (KernelSpec.gaussian(2, 0.9), KernelSpec.bspline(2, 3), KernelSpec.matern(2, 3.5, 1.2)):
        err = verify_sqrt_identity(k, sqrt_kernel_of(k), [0.1, -0.2], [0.5, 0.4])
        assert err <= 1e-4


def test_sqrt_identity_detects_wrong_partner():
    g = KernelSpec.gaussian(1, 1.0)
    wrong = sqrt_kernel_of(g).rescaled(1.01)
    assert verify_sqrt_identity(g, wrong, [0.0], [0.5]) > 1e-3


def test_median_small_examples():
    assert median_heuristic(np.array([[0.0], [1.0], [3.0]])) == 2.0
    with pytest.warns(DegenerateBandwidthWarning):
        assert median_heuristic(np.array([[1.0, 2.0], [1.0, 2.0]])) == 0.0


def test_median_max_points_at_least_n_is_exact():
    X = np.random.default_rng(2).normal(size=(301, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert median_heuristic(X, max_points=301) == np.median(pdist(X))
        assert median_heuristic(X, max_points=10 ** 6) == np.median(pdist(X))


def test_median_thins_before_measuring():
    X = np.random.default_rng(3).normal(size=(1000, 2))
    idx = np.array([99, 199, 299, 399, 499, 599, 699, 799, 899, 999])
    assert median_heuristic(X, max_points=10) == np.median(pdist(X[idx]))


def test_streamed_order_statistics_match_full_sort():
    X = np.random.default_rng(4).normal(size=(700, 2))
    dists = np.sort(pdist(X))
    ranks = [0, 17, len(dists) // 2, len(dists) - 1]
    got = _kth_pairwise_distances(X, ranks)
    np.testing.assert_array_equal(got, dists[ranks])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_median_is_translation_and_permutation_invariant(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    base = _median_pairwise_distance(X)
    assert _median_pairwise_distance(X[rng.permutation(n)]) == base
    assert _median_pairwise_distance(X + 3.0) == pytest.approx(base, rel=1e-12)

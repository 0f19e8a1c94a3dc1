import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kthin.exceptions import UnsupportedKernelError
from kthin.kernels import KernelSpec, kernel_matrix
from kthin.mmd import (
    MmdWorkspace,
    mmd_empirical,
    mmd_sq_empirical,
    mmd_sq_to_target,
    mmd_to_input,
    swap_delta,
    target_mean_embedding,
    target_self_embedding,
)
from kthin.targets import TargetSpec, sample_target
from kthin.thinning import Coreset

KERNELS = [KernelSpec.gaussian(2, 1.0), KernelSpec.matern(2, 2.5, 1.3), KernelSpec.bspline(2, 3)]
KIDS = ["gauss", "matern", "bspline"]


def brute_mmd_sq(k, X, Y):
    # full kernel matrices, no cached sums
    return kernel_matrix(k, X).mean() + kernel_matrix(k, Y).mean() - 2 * kernel_matrix(k, X, Y).mean()


def test_identical_sets():
    X = np.random.default_rng(0).normal(size=(20, 2))
    k = KernelSpec.gaussian(2, 1.0)
    assert mmd_sq_empirical(k, X, X) < 1e-15
    assert mmd_sq_empirical(k, X, X[::-1]) < 1e-15
    assert mmd_sq_empirical(k, np.array([[1.0, 2.0], [1.0, 2.0]]), np.array([[1.0, 2.0]])) == 0.0


def test_singletons():
    k = KernelSpec.gaussian(2, 1.0)
    val = mmd_sq_empirical(k, [[0.0, 0.0]], [[1.0, 1.0]])
    assert val == pytest.approx(2 - 2 * math.exp(-1), rel=1e-15)
    assert val == pytest.approx(1.2642411, abs=5e-8)
    assert mmd_empirical(k, [[0.0, 0.0]], [[1.0, 1.0]]) == pytest.approx(math.sqrt(val))


@pytest.mark.parametrize("k", KERNELS, ids=KIDS)
def test_workspace_agrees_with_direct(k):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(128, 2))
    ws = MmdWorkspace(k, X)
    for s in (1, 5, 16, 128):
        idx = rng.choice(128, s, replace=False)
        direct = mmd_sq_empirical(k, X, X[idx])
        assert ws.mmd_sq(idx) == pytest.approx(direct, rel=1e-10, abs=1e-15)
    assert mmd_to_input(ws, Coreset(np.arange(128), "all")) < 1e-7


def test_singleton_formula():
    k = KernelSpec.gaussian(2, 0.8)
    X = np.random.default_rng(2).normal(size=(50, 2))
    ws = MmdWorkspace(k, X)
    z = 17
    expected = ws.diag[z] - 2 * ws.row_sums[z] / 50 + ws.total_sum / 50 ** 2
    assert ws.mmd_sq([z]) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("k", KERNELS, ids=KIDS)
def test_swap_delta_brute_force(k):
    rng = np.random.default_rng(3)
    n, s = 40, 6
    X = rng.normal(size=(n, 2))
    ws = MmdWorkspace(k, X)
    core = rng.choice(n, s, replace=False)
    ws.set_coreset(core)
    base = brute_mmd_sq(k, X, X[core])
    for pos in range(s):
        deltas = ws.swap_deltas(pos)
        assert deltas[core[pos]] == 0.0
        for z in range(n):
            new = core.copy()
            new[pos] = z
            assert deltas[z] == pytest.approx(brute_mmd_sq(k, X, X[new]) - base, abs=1e-12)


def test_swap_delta_function_and_apply():
    k = KernelSpec.gaussian(2, 1.0)
    rng = np.random.default_rng(4)
    X = rng.normal(size=(64, 2))
    ws = MmdWorkspace(k, X)
    core = rng.choice(64, 8, replace=False)
    assert swap_delta(ws, core, 2, core[2]) == 0.0
    for pos in range(8):
        d = ws.swap_deltas(pos)
        z = int(np.argmin(d))
        before = ws.current_mmd_sq()
        ws.apply_swap(pos, z)
        ws.check_consistency()
        assert ws.current_mmd_sq() == pytest.approx(before + d[z], abs=1e-13)


def test_stale_cache_detected():
    k = KernelSpec.gaussian(2, 1.0)
    X = np.random.default_rng(5).normal(size=(30, 2))
    ws = MmdWorkspace(k, X)
    ws.set_coreset([0, 1, 2])
    ws.coreset[0] = 9
    with pytest.raises(AssertionError):
        ws.check_consistency()


def test_negative_roundoff_clamped_quietly():
    k = KernelSpec.gaussian(3, 50.0)
    X = np.random.default_rng(6).normal(size=(300, 3)) * 1e-3
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert mmd_sq_empirical(k, X, X[::-1]) >= 0.0


# closed forms against the target


def mc_embeddings(k, target, probes, draws, seed):
    rng = np.random.default_rng(seed)
    A = sample_target(target, draws, rng)
    B = sample_target(target, draws, rng)
    inv = 1 / (2 * k.sigma ** 2)
    pk = np.array([np.exp(-inv * ((A - y) ** 2).sum(1)).mean() for y in probes])
    ppk = np.exp(-inv * ((A - B) ** 2).sum(1)).mean()
    return pk, ppk


@pytest.mark.parametrize("target,sigma2", [(TargetSpec.std_gaussian(2), 4.0), (TargetSpec.std_gaussian(10), 20.0),
                                           (TargetSpec.mixture(4), 4.0), (TargetSpec.mixture(8), 4.0)],
                         ids=["g2", "g10", "mog4", "mog8"])
def test_embeddings_against_monte_carlo(target, sigma2):
    k = KernelSpec.gaussian(target.dim, math.sqrt(sigma2))
    probes = np.vstack([np.zeros((1, target.dim)), sample_target(target, 3, 99)])
    pk, ppk = mc_embeddings(k, target, probes, 200_000, 7)
    np.testing.assert_allclose(target_mean_embedding(k, target, probes), pk, rtol=2e-2)
    assert target_self_embedding(k, target) == pytest.approx(ppk, rel=2e-2)


@pytest.mark.parametrize("d,s2", [(1, 1.0), (2, 4.0), (5, 10.0)])
def test_point_at_mean(d, s2):
    k = KernelSpec.gaussian(d, math.sqrt(s2))
    got = mmd_sq_to_target(k, TargetSpec.std_gaussian(d), np.zeros((1, d)))
    expected = (s2 / (s2 + 2)) ** (d / 2) - 2 * (s2 / (s2 + 1)) ** (d / 2) + 1
    assert got == pytest.approx(expected, rel=1e-13)


def test_target_forms_need_gaussian():
    with pytest.raises(UnsupportedKernelError):
        mmd_sq_to_target(KernelSpec.matern(2, 2.5, 1.0), TargetSpec.std_gaussian(2), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        mmd_sq_to_target(KernelSpec.gaussian(3, 1.0), TargetSpec.std_gaussian(2), np.zeros((1, 3)))


def test_scale_multiplies_squared_mmd():
    S = np.random.default_rng(8).normal(size=(10, 2))
    t = TargetSpec.std_gaussian(2)
    a = mmd_sq_to_target(KernelSpec.gaussian(2, 2.0), t, S)
    b = mmd_sq_to_target(KernelSpec.gaussian(2, 2.0, scale=3.0), t, S)
    assert b == pytest.approx(3 * a, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2 ** 31), st.sampled_from(["g", "m"]))
def test_target_mmd_nonnegative(s, seed, kind):
    t = TargetSpec.std_gaussian(2) if kind == "g" else TargetSpec.mixture(4)
    S = np.random.default_rng(seed).normal(size=(s, 2)) * 3
    assert mmd_sq_to_target(KernelSpec.gaussian(2, 2.0), t, S) >= 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2 ** 31))
def test_empirical_mmd_symmetric(n, s, seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(n, 2)), rng.normal(size=(s, 2))
    k = KernelSpec.gaussian(2, 1.0)
    assert mmd_sq_empirical(k, X, Y) == pytest.approx(mmd_sq_empirical(k, Y, X), abs=1e-14)

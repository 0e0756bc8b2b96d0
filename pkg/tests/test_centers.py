import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kkmini import BoundKernel, KernelSpec, SparseCenter, assign_batch, center_center_ip, center_point_ip, center_sq_dist
from kkmini.oracle import exhaustive_assign

from conftest import random_psd_kernel


def test_sparse_center_validation():
    with pytest.raises(ValueError):
        SparseCenter([], [])
    with pytest.raises(ValueError):
        SparseCenter([0, 1], [0.5])
    with pytest.raises(ValueError):
        SparseCenter([0, 1], [1.5, -0.5])
    with pytest.raises(ValueError):
        SparseCenter([0, 1], [0.7, 0.7])
    np.testing.assert_array_equal(SparseCenter([2, 2, 0], [0.25, 0.25, 0.5]).dense(3), [0.5, 0, 0.5])


def test_point_ip_examples():
    pts = np.random.default_rng(0).normal(size=(5, 2))
    kern = BoundKernel(KernelSpec.gaussian(1.0), pts)
    assert center_point_ip(kern, SparseCenter.singleton(3), 1) == kern.block([1], [3])[0, 0]
    dup = SparseCenter([4, 4], [0.5, 0.5])
    assert center_point_ip(kern, dup, 0) == pytest.approx(kern.block([0], [4])[0, 0], abs=1e-15)


@given(st.integers(0, 10_000))
def test_point_ip_linear_matches_explicit(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(10, 3))
    idx = rng.integers(0, 10, 4)
    w = rng.random(4)
    w /= w.sum()
    c = SparseCenter(idx, w)
    kern = BoundKernel(KernelSpec.linear(), pts)
    x = int(rng.integers(10))
    assert center_point_ip(kern, c, x) == pytest.approx(pts[x] @ (w @ pts[idx]), abs=1e-10)


def test_sq_dist_examples():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 1.0]])
    lin = BoundKernel(KernelSpec.linear(), pts)
    assert center_sq_dist(lin, SparseCenter.uniform([0, 1]), 2) == pytest.approx(1.0)
    g = BoundKernel(KernelSpec.gaussian(1.0), pts)
    assert center_sq_dist(g, SparseCenter.singleton(1), 1) == 0.0
    d = center_sq_dist(g, SparseCenter.singleton(0), 2)
    assert d == pytest.approx(2 * (1 - np.exp(-2.0)))
    assert 0 < d < 2


def test_center_center_examples():
    pts = np.random.default_rng(1).normal(size=(4, 2))
    g = BoundKernel(KernelSpec.gaussian(1.5), pts)
    assert center_center_ip(g, SparseCenter.singleton(2), SparseCenter.singleton(2)) == 1.0
    assert center_center_ip(g, SparseCenter.singleton(0), SparseCenter.singleton(3)) == g.block([0], [3])[0, 0]


@given(st.integers(0, 10_000))
def test_center_gap_nonnegative_psd(seed):
    rng = np.random.default_rng(seed)
    kern = random_psd_kernel(rng, 15)
    a = SparseCenter(rng.integers(0, 15, 5), rng.dirichlet(np.ones(5)))
    b = SparseCenter(rng.integers(0, 15, 3), rng.dirichlet(np.ones(3)))
    sq = center_center_ip(kern, a, a) - 2 * center_center_ip(kern, a, b) + center_center_ip(kern, b, b)
    scale = max(1.0, np.abs(kern.diag()).max())
    assert sq >= -1e-9 * scale
    assert center_center_ip(kern, a, b) == pytest.approx(center_center_ip(kern, b, a), rel=1e-12, abs=1e-12)


def test_assign_examples():
    pts = np.random.default_rng(2).normal(size=(20, 2))
    kern = BoundKernel(KernelSpec.gaussian(2.0), pts)
    assert np.all(assign_batch(kern, [SparseCenter.singleton(5)], np.arange(20)).labels == 0)
    same = [SparseCenter.singleton(5), SparseCenter.singleton(5)]
    a = assign_batch(kern, same, np.arange(20))
    assert np.all(a.labels == 0) and a.counts.tolist() == [20, 0]
    with pytest.raises(ValueError):
        assign_batch(kern, [], [0])


@given(st.integers(0, 10_000))
def test_assign_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    kern = random_psd_kernel(rng, 20)
    centers = [SparseCenter(rng.integers(0, 20, 3), rng.dirichlet(np.ones(3))) for _ in range(3)]
    pts = np.arange(20)
    got = assign_batch(kern, centers, pts).labels
    ref = exhaustive_assign(kern, centers, pts)
    # only ties within rounding may differ
    from kkmini.centers import sq_dists
    d = sq_dists(kern, centers, pts)
    diff = got != ref
    assert np.allclose(d[diff, got[diff]], d[diff, ref[diff]], rtol=1e-9, atol=1e-9)
    perm = rng.permutation(20)
    np.testing.assert_array_equal(assign_batch(kern, centers, pts[perm]).labels, got[perm])


@given(st.integers(0, 10_000))
def test_norm_bound(seed):
    rng = np.random.default_rng(seed)
    kern = random_psd_kernel(rng, 12)
    c = SparseCenter(rng.integers(0, 12, 6), rng.dirichlet(np.ones(6)))
    gamma = np.sqrt(kern.diag().max())
    assert np.sqrt(max(c.self_ip(kern), 0.0)) <= gamma + 1e-9


@given(st.integers(0, 10_000))
def test_kanungo_identity(seed):
    rng = np.random.default_rng(seed)
    kern = random_psd_kernel(rng, 14)
    s = rng.integers(0, 14, int(rng.integers(1, 8)))
    c = SparseCenter(rng.integers(0, 14, 4), rng.dirichlet(np.ones(4)))
    cm = SparseCenter.uniform(s)
    lhs = sum(center_sq_dist(kern, c, int(x)) for x in s)
    within = sum(center_sq_dist(kern, cm, int(x)) for x in s)
    gap = center_center_ip(kern, c, c) - 2 * center_center_ip(kern, c, cm) + center_center_ip(kern, cm, cm)
    scale = max(1.0, abs(lhs))
    assert lhs == pytest.approx(within + s.size * gap, abs=1e-8 * scale)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kkmini import BoundKernel, KernelSpec, compute_gamma, gram_block, kernel_eval
from kkmini.kernels import gamma_report, load_precomputed, read_kkm1, write_kkm1

finite = st.floats(-50, 50, allow_nan=False)


def test_gaussian_self_is_one():
    assert kernel_eval(KernelSpec.gaussian(3.0), [1.5, -2.0], [1.5, -2.0]) == 1.0


def test_gaussian_unit_exponent():
    # ||x - y||^2 = 4, kappa = 4
    assert kernel_eval(KernelSpec.gaussian(4.0), [0.0, 0.0], [2.0, 0.0]) == pytest.approx(math.exp(-1), abs=1e-15)


def test_linear_dot():
    assert kernel_eval(KernelSpec.linear(), [1, 2], [3, -1]) == 1.0


def test_polynomial_value():
    assert kernel_eval(KernelSpec.polynomial(3, 1.0), [1, 1], [2, 0]) == 27.0


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite),
       st.sampled_from(["gaussian", "linear", "polynomial"]))
def test_eval_symmetric(x, y, kind):
    spec = {"gaussian": KernelSpec.gaussian(5.0), "linear": KernelSpec.linear(),
            "polynomial": KernelSpec.polynomial(2, 0.5)}[kind]
    assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)


def test_eval_errors():
    with pytest.raises(ValueError):
        kernel_eval(KernelSpec.linear(), [1, 2], [1, 2, 3])
    pre = KernelSpec.precomputed(np.eye(3))
    with pytest.raises(IndexError):
        kernel_eval(pre, 0, 3)
    assert kernel_eval(pre, 1, 1) == 1.0


@pytest.mark.parametrize("kw", [dict(kind="gaussian", kappa=0.0), dict(kind="gaussian"),
                                dict(kind="polynomial", degree=0), dict(kind="polynomial", degree=1.5),
                                dict(kind="precomputed"), dict(kind="sigmoid")])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        KernelSpec(**kw)


def test_precomputed_must_be_symmetric_and_square():
    with pytest.raises(ValueError):
        KernelSpec.precomputed(np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValueError):
        KernelSpec.precomputed(np.ones((2, 3)))
    # relative tolerance 1e-9 passes
    KernelSpec.precomputed(np.array([[1.0, 0.5], [0.5 + 1e-12, 1.0]]))


def test_gram_block_singleton_and_diag():
    pts = np.random.default_rng(0).normal(size=(6, 2))
    spec = KernelSpec.gaussian(2.0)
    assert gram_block(spec, pts, [2], [2]).shape == (1, 1)
    g = gram_block(spec, pts, range(6), range(6))
    assert np.all(np.diag(g) == 1.0)


@pytest.mark.parametrize("spec", [KernelSpec.gaussian(1.7), KernelSpec.linear(), KernelSpec.polynomial(3, 0.3)])
def test_gram_block_matches_eval_loop(spec):
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(12, 3))
    rows, cols = rng.integers(0, 12, 5), rng.integers(0, 12, 5)
    blk = gram_block(spec, pts, rows, cols)
    ref = np.array([[kernel_eval(spec, pts[i], pts[j]) for j in cols] for i in rows])
    np.testing.assert_allclose(blk, ref, rtol=1e-12, atol=1e-12)


def test_gamma_examples():
    pts = np.random.default_rng(2).normal(size=(30, 4)) * 10
    assert compute_gamma(KernelSpec.gaussian(0.3), pts) == 1.0
    m = np.diag([2.25, 0.16, 1.0])
    assert compute_gamma(KernelSpec.precomputed(m)) == 1.5
    with pytest.raises(ValueError):
        compute_gamma(KernelSpec.linear(), np.empty((0, 2)))


def test_gamma_report_indefinite():
    m = np.array([[0.0, 0.25], [0.25, 0.0]])
    rep = gamma_report(KernelSpec.precomputed(m))
    assert rep == {"sqrt_max_diag": 0.0, "sqrt_max_abs": 0.5}


@pytest.mark.parametrize("spec", [KernelSpec.gaussian(2.0), KernelSpec.polynomial(2, 1.0)])
def test_bound_kernel_modes_agree(spec):
    pts = np.random.default_rng(3).normal(size=(2100, 3))
    lazy = BoundKernel(spec, pts, cache_bytes=1 << 26)
    full = BoundKernel(spec, pts, materialize=True)
    rows = np.arange(1000, 1100)
    np.testing.assert_allclose(lazy.row_block(1000, 1100), full.gram[rows], rtol=0, atol=1e-13)
    np.testing.assert_allclose(lazy.row_block(1000, 1100), full.gram[rows], rtol=0, atol=1e-13)  # cached
    r, c = np.array([5, 2000, 7]), np.arange(0, 2100, 7)
    np.testing.assert_allclose(lazy.block(r, c), full.block(r, c), atol=1e-13)
    np.testing.assert_allclose(lazy.rows([4, 9]), full.rows([4, 9]), atol=1e-13)
    np.testing.assert_array_equal(lazy.diag(), full.diag())


def test_block_counts_and_bounds():
    k = BoundKernel(KernelSpec.linear(), np.ones((5, 2)))
    k.block([0, 1], [2, 3, 4])
    assert k.evals == 6
    with pytest.raises(IndexError):
        k.block([5], [0])
    twin = k.fork()
    twin.block([0], [0])
    assert (k.evals, twin.evals) == (6, 1)


@pytest.mark.parametrize("materialize", [False, True])
@pytest.mark.parametrize("accel", [False, True])
def test_window_products_against_dense(materialize, accel):
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(400, 2))
    kern = BoundKernel(KernelSpec.gaussian(1.5), pts, materialize=materialize, accel=accel)
    g = BoundKernel(KernelSpec.gaussian(1.5), pts, materialize=True).gram
    pts_idx = np.unique(rng.integers(0, 400, 60))
    members = np.concatenate([rng.integers(0, 400, 30), pts_idx[:5]])  # overlap on purpose
    base = rng.random(members.size)
    ptr = np.array([0, 10, 11, 25, members.size])
    kk, r = kern.window_products(pts_idx, members, base, ptr)
    np.testing.assert_allclose(kk, g[np.ix_(pts_idx, pts_idx)], atol=1e-13)
    ref = np.column_stack([g[np.ix_(pts_idx, members[s:e])] @ base[s:e] for s, e in zip(ptr[:-1], ptr[1:])])
    np.testing.assert_allclose(r, ref, atol=1e-12)


def test_kkm1_roundtrip(tmp_path):
    a = np.random.default_rng(5).normal(size=(4, 4))
    m = a @ a.T
    p = tmp_path / "k.kkm1"
    write_kkm1(p, m)
    np.testing.assert_array_equal(read_kkm1(p), m)
    assert load_precomputed(p).matrix.shape == (4, 4)
    (tmp_path / "bad.kkm1").write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(ValueError):
        read_kkm1(tmp_path / "bad.kkm1")

"""Jacobi SVD, eigensolver and pseudoinverse against numpy/scipy oracles."""

import numpy as np
import pytest
import scipy.linalg

from ctxval import linalg
from ctxval.errors import NumericalFailure, ValidationError

KERNELS = sorted(linalg.kernel_modules().items())
IDS = [name for name, _ in KERNELS]


@pytest.fixture(params=[k for _, k in KERNELS], ids=IDS)
def kernels(request):
    return request.param


def test_backend_is_named():
    assert linalg.BACKEND in {"cython", "python"}
    assert "python" in linalg.kernel_modules()


@pytest.mark.parametrize("shape", [(1, 1), (2, 2), (3, 2), (2, 3), (6, 4), (4, 9), (12, 12)])
def test_svd_matches_numpy(kernels, shape):
    rng = np.random.default_rng(sum(shape))
    a = rng.standard_normal(shape)
    u, s, vt = linalg.svd(a, kernels=kernels)
    np.testing.assert_allclose(s, np.linalg.svd(a, compute_uv=False), rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, a, atol=1e-13)
    k = min(shape)
    np.testing.assert_allclose(u.T @ u, np.eye(k), atol=1e-13)
    np.testing.assert_allclose(vt @ vt.T, np.eye(k), atol=1e-13)
    assert np.all(np.diff(s) <= 0)


def test_svd_rank_deficient(kernels):
    rng = np.random.default_rng(3)
    a = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
    _, s, _ = linalg.svd(a, kernels=kernels)
    np.testing.assert_allclose(s[:2], np.linalg.svd(a, compute_uv=False)[:2], rtol=1e-12)
    assert np.all(s[2:] < 1e-13 * s[0])


def test_svd_zero_matrix(kernels):
    u, s, vt = linalg.svd(np.zeros((3, 2)), kernels=kernels)
    assert np.all(s == 0)


def test_svd_rejects_bad_input():
    with pytest.raises(ValidationError):
        linalg.svd(np.ones(3))
    with pytest.raises(ValidationError):
        linalg.svd(np.array([[1.0, np.nan]]))


def test_svd_sweep_cap_raises(kernels):
    a = np.random.default_rng(0).standard_normal((8, 8))
    with pytest.raises(NumericalFailure):
        linalg.svd(a, max_sweeps=1, kernels=kernels)


@pytest.mark.parametrize("shape", [(2, 2), (2, 3), (3, 2), (5, 7), (7, 5)])
def test_pinv_matches_scipy(kernels, shape):
    a = np.random.default_rng(10 + sum(shape)).standard_normal(shape)
    plus, s, rank = linalg.pinv(a, kernels=kernels)
    np.testing.assert_allclose(plus, scipy.linalg.pinv(a), atol=1e-12)
    assert rank == min(shape)


def test_pinv_cutoff_drops_small_singular_values(kernels):
    a = np.diag([1.0, 1e-3, 1e-15])
    plus, s, rank = linalg.pinv(a, kernels=kernels)
    assert rank == 2
    np.testing.assert_allclose(plus, np.diag([1.0, 1e3, 0.0]), atol=1e-9)
    plus, _, rank = linalg.pinv(a, rel_tol=1e-2, kernels=kernels)
    assert rank == 1
    np.testing.assert_allclose(plus, np.diag([1.0, 0.0, 0.0]))


def test_pinv_zero_and_bad_tolerance():
    plus, s, rank = linalg.pinv(np.zeros((2, 3)))
    assert rank == 0 and plus.shape == (3, 2) and not plus.any()
    for tol in (0.0, 1.0, -1e-3):
        with pytest.raises(ValidationError):
            linalg.pinv(np.eye(2), rel_tol=tol)


def test_default_tolerance():
    assert linalg.default_rel_tol((3, 5)) == 5 * np.finfo(float).eps * 64


@pytest.mark.parametrize("n", [1, 2, 3, 5, 9, 16])
def test_eigh_matches_scipy(kernels, n):
    rng = np.random.default_rng(n)
    h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = h + h.conj().T
    vals, vecs = linalg.eigh(h, kernels=kernels)
    np.testing.assert_allclose(vals, scipy.linalg.eigvalsh(h), atol=1e-12 * max(1, np.abs(vals).max()))
    np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.conj().T, h, atol=1e-12)


def test_eigh_degenerate_and_diagonal(kernels):
    h = np.diag([2.0, 2.0, -1.0]).astype(complex)
    vals, vecs = linalg.eigh(h, kernels=kernels)
    np.testing.assert_allclose(vals, [-1.0, 2.0, 2.0])
    np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.conj().T, h, atol=1e-15)
    u = scipy.linalg.expm(1j * np.array([[0, 1, 0], [1, 0, 2], [0, 2, 0]]))
    vals, vecs = linalg.eigh(u @ h @ u.conj().T, kernels=kernels)
    np.testing.assert_allclose(vals, [-1.0, 2.0, 2.0], atol=1e-13)


def test_eigh_rejects_non_square():
    with pytest.raises(ValidationError):
        linalg.eigh(np.ones((2, 3)))


def test_backends_agree():
    mods = linalg.kernel_modules()
    if len(mods) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 4))
    s_py = linalg.svd(a, kernels=mods["python"])[1]
    s_cy = linalg.svd(a, kernels=mods["cython"])[1]
    np.testing.assert_allclose(s_py, s_cy, rtol=1e-14)


def test_subnormal_singular_value_raises():
    with pytest.raises(NumericalFailure):
        linalg.pinv(np.array([[2.2e-311]]))

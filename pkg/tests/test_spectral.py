import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdslab.errors import InvalidInput, NotPositiveDefinite, NotPSD
from mdslab.spectral import as_symmetric, cholesky_factor, is_psd, lambda_min, psd_sqrt, spectral_stats, tol_psd

from conftest import random_psd


def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky_factor(np.eye(3)), np.eye(3))


def test_cholesky_2x2_reconstructs():
    m = np.array([[4.0, 2.0], [2.0, 3.0]])
    L = cholesky_factor(m)
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-12)
    assert np.max(np.abs(L @ L.T - m)) <= 1e-10 * np.max(np.abs(m))


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_rejects_singular():
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor(np.ones((3, 3)))


def test_cholesky_matches_lapack(rng):
    m = random_psd(rng, 6, jitter=0.1)
    np.testing.assert_allclose(cholesky_factor(m), np.linalg.cholesky(m), rtol=1e-10, atol=1e-12)


def test_asymmetric_input_rejected():
    with pytest.raises(InvalidInput):
        as_symmetric(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InvalidInput):
        as_symmetric(np.ones((2, 3)))
    with pytest.raises(InvalidInput):
        as_symmetric(np.array([[np.nan, 0.0], [0.0, 1.0]]))


@pytest.mark.parametrize("d", [1, 4])
def test_psd_sqrt_identity(d):
    np.testing.assert_allclose(psd_sqrt(np.eye(d)), np.eye(d), atol=1e-14)


def test_psd_sqrt_diagonal():
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)


def test_psd_sqrt_random(rng):
    m = random_psd(rng, 5)
    s = psd_sqrt(m)
    np.testing.assert_array_equal(s, s.T)
    assert np.max(np.abs(s @ s - m)) <= 1e-8 * (1 + np.max(np.abs(m)))


def test_psd_sqrt_clamps_boundary():
    m = np.array([[1.0, 1.0], [1.0, 1.0]])
    m[1, 1] -= 1e-13  # tiny negative eigenvalue inside tolerance
    s = psd_sqrt(m)
    assert np.max(np.abs(s @ s - m)) < 1e-8


def test_psd_sqrt_rejects_negative():
    with pytest.raises(NotPSD):
        psd_sqrt(np.diag([1.0, -0.1]))


def test_tolerance_scale():
    assert tol_psd(np.eye(3) * 5.0) == pytest.approx(1e-10 * 3 * 5.0)


def test_spectral_stats_examples():
    s = spectral_stats(np.eye(4))
    assert (s.lambda_min, s.lambda_max, s.d_min, s.d_max, s.op_norm) == (1, 1, 1, 1, 1)
    s = spectral_stats(np.diag([0.5, 2.0]))
    assert (s.lambda_min, s.lambda_max, s.d_min, s.d_max) == pytest.approx((0.5, 2.0, 0.5, 2.0))
    s = spectral_stats(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert s.lambda_min == pytest.approx(1.0, rel=1e-12)
    assert s.lambda_max == pytest.approx(3.0, rel=1e-12)


def test_op_norm_of_negative_definite():
    assert spectral_stats(-3.0 * np.eye(2)).op_norm == pytest.approx(3.0)


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 8)


@given(seeds, dims, st.integers(1, 8))
def test_sqrt_squares_back(seed, d, rank):
    m = random_psd(np.random.default_rng(seed), d, rank=min(rank, d))
    s = psd_sqrt(m)
    assert np.max(np.abs(s @ s - m)) <= 1e-8 * (1 + np.max(np.abs(m)))
    assert is_psd(s)


@given(seeds, dims)
def test_lambda_min_superadditive(seed, d):
    rng = np.random.default_rng(seed)
    a, b = random_psd(rng, d), random_psd(rng, d)
    assert lambda_min(a + b) >= lambda_min(a) + lambda_min(b) - 1e-9 * (1 + np.abs(a + b).max())


@given(seeds, dims)
def test_stats_ordering(seed, d):
    m = random_psd(np.random.default_rng(seed), d, jitter=0.01)
    s = spectral_stats(m)
    slack = 1e-9 * s.lambda_max
    assert s.lambda_min <= s.d_min + slack
    assert s.d_min <= s.d_max
    assert s.d_max <= s.lambda_max + slack
    assert s.op_norm == max(abs(s.lambda_min), abs(s.lambda_max))


@given(st.floats(0, 1e6), st.integers(1, 6))
def test_scaled_identity_norm(c, d):
    assert spectral_stats(c * np.eye(d)).op_norm == pytest.approx(c)

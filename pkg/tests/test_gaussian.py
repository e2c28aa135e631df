import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, norm

from mdslab.bounds import gaussian_max_tail_radius
from mdslab.errors import InvalidInput, NotPositiveDefinite
from mdslab.gaussian import Rectangle, empirical_rect_prob, empirical_rect_probs, rect_prob, sample_mvn

from conftest import random_psd

INF = np.inf


def corr(rng, d):
    m = random_psd(rng, d, jitter=0.3 * d)
    s = np.sqrt(np.diag(m))
    return m / np.outer(s, s)


class TestRectangle:
    def test_invariants(self):
        with pytest.raises(InvalidInput):
            Rectangle([1.0], [0.0])
        with pytest.raises(InvalidInput):
            Rectangle([np.nan], [0.0])
        with pytest.raises(InvalidInput):
            Rectangle([0.0, 0.0], [1.0])

    def test_membership_closed(self):
        r = Rectangle([-1.0, 0.0], [1.0, 2.0])
        x = np.array([[-1.0, 0.0], [1.0, 2.0], [1.0001, 1.0], [0.0, -1e-9]])
        np.testing.assert_array_equal(r.contains(x), [True, True, False, False])

    def test_negation_and_equality(self):
        r = Rectangle([-INF, 0.0], [1.0, 2.0])
        assert -r == Rectangle([-1.0, -2.0], [INF, 0.0])
        assert hash(-(-r)) == hash(r)

    def test_immutable(self):
        r = Rectangle([0.0], [1.0])
        with pytest.raises(ValueError):
            r.lower[0] = -1.0


class TestSampleMvn:
    def test_covariance(self):
        x = sample_mvn(np.eye(2), 10**5, seed=7)
        assert np.max(np.abs(np.cov(x, rowvar=False) - np.eye(2))) < 0.02

    def test_zero_root(self):
        np.testing.assert_array_equal(sample_mvn(np.zeros((2, 2)), 3, seed=1), np.zeros((3, 2)))

    def test_deterministic(self):
        root = np.linalg.cholesky(np.array([[2.0, 0.5], [0.5, 1.0]]))
        np.testing.assert_array_equal(sample_mvn(root, 50, 99), sample_mvn(root, 50, 99))
        assert not np.array_equal(sample_mvn(root, 50, 99), sample_mvn(root, 50, 100))


class TestRectProb:
    def test_full_space(self):
        est = rect_prob(np.eye(4), Rectangle.full(4))
        assert est.value == 1.0 and est.stderr == 0.0

    def test_orthant(self):
        est = rect_prob(np.array([[1.0, 0.5], [0.5, 1.0]]), Rectangle([0.0, 0.0], [INF, INF]))
        assert abs(est.value - (0.25 + math.asin(0.5) / (2 * math.pi))) < 1e-3

    def test_product_box(self):
        est = rect_prob(np.eye(3), Rectangle([-1.0] * 3, [1.0] * 3))
        assert abs(est.value - (norm.cdf(1) - norm.cdf(-1)) ** 3) < 1e-3

    def test_degenerate_box(self):
        assert rect_prob(np.eye(2), Rectangle([0.0, -1.0], [0.0, 1.0])).value == 0.0

    def test_rejects_singular(self):
        with pytest.raises(NotPositiveDefinite):
            rect_prob(np.ones((2, 2)), Rectangle([0.0, 0.0], [1.0, 1.0]))

    def test_budget_contract(self):
        with pytest.raises(InvalidInput):
            rect_prob(np.eye(2), Rectangle([0.0, 0.0], [1.0, 1.0]), budget=512)
        with pytest.raises(InvalidInput):
            rect_prob(np.eye(2), Rectangle([0.0, 0.0], [1.0, 1.0]), n_shifts=4)

    def test_seed_determinism(self):
        s = np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 1.0]])
        r = Rectangle([-1.0, -0.5, -INF], [0.5, 2.0, 0.3])
        assert rect_prob(s, r, seed=5) == rect_prob(s, r, seed=5)

    @pytest.mark.parametrize("d", [3, 6, 10])
    def test_against_scipy_cdf(self, d):
        # independent route: scipy's Genz-Bretz integration of the lower orthant
        rng = np.random.default_rng(d)
        s = corr(rng, d)
        upper = rng.uniform(0.0, 1.5, d)
        est = rect_prob(s, Rectangle(np.full(d, -INF), upper), budget=8192, seed=1)
        ref = multivariate_normal.cdf(upper, np.zeros(d), s, abseps=1e-6, releps=1e-6)
        assert abs(est.value - ref) <= max(3 * est.stderr, 2e-4)

    def test_stderr_covers_error(self):
        # 3*stderr should cover the error in most of 30 independent estimates
        s = np.array([[1.0, 0.6, 0.2], [0.6, 1.0, 0.4], [0.2, 0.4, 1.0]])
        r = Rectangle([-0.5, -1.0, -2.0], [1.0, 0.5, 0.2])
        truth = rect_prob(s, r, budget=2**16, seed=0).value
        hits = [abs(e.value - truth) <= 3 * e.stderr + 1e-6 for e in (rect_prob(s, r, seed=k) for k in range(1, 31))]
        assert sum(hits) >= 26


class TestEmpirical:
    def test_examples(self, rng):
        x = rng.standard_normal((100, 2))
        assert empirical_rect_prob(x, Rectangle.full(2)) == 1.0
        assert empirical_rect_prob(np.array([[0.0, 0.0], [2.0, 2.0]]), Rectangle([-1.0, -1.0], [1.0, 1.0])) == 0.5
        z = rng.standard_normal((10**5, 1))
        assert abs(empirical_rect_prob(z, Rectangle([-INF], [0.0])) - 0.5) < 0.005

    def test_vectorised_matches_scalar(self, rng):
        x = rng.standard_normal((500, 3))
        rects = [Rectangle([-INF, -1.0, -INF], [0.5, INF, 0.0]), Rectangle([-1.0] * 3, [1.0] * 3), Rectangle.full(3)]
        np.testing.assert_array_equal(empirical_rect_probs(x, rects), [empirical_rect_prob(x, r) for r in rects])


def boxes(d):
    ends = st.lists(st.floats(-2.5, 2.5), min_size=2 * d, max_size=2 * d)
    return ends.map(lambda v: Rectangle(np.minimum(v[:d], v[d:]), np.maximum(v[:d], v[d:])))


@given(st.integers(0, 2**31), boxes(3))
def test_symmetry(seed, r):
    s = corr(np.random.default_rng(seed), 3)
    a = rect_prob(s, r, seed=seed)
    b = rect_prob(s, -r, seed=seed + 1)
    assert abs(a.value - b.value) <= 3 * (a.stderr + b.stderr) + 1e-9


@given(st.integers(0, 2**31), boxes(3), st.floats(0.0, 1.0))
def test_monotone_in_box(seed, r, grow):
    s = corr(np.random.default_rng(seed), 3)
    big = Rectangle(r.lower - grow, r.upper + grow)
    a = rect_prob(s, r, seed=seed)
    b = rect_prob(s, big, seed=seed + 1)
    assert 0.0 <= a.value <= 1.0 and a.stderr >= 0.0
    assert a.value <= b.value + 3 * (a.stderr + b.stderr) + 1e-9


def test_cross_oracle_random_boxes():
    rng = np.random.default_rng(3)
    d = 5
    s = corr(rng, d)
    x = sample_mvn(np.linalg.cholesky(s), 10**5, seed=4)
    for i in range(20):
        lo = np.where(rng.random(d) < 0.4, -INF, rng.uniform(-2, 0, d))
        hi = np.where(rng.random(d) < 0.4, INF, rng.uniform(0, 2, d))
        r = Rectangle(lo, hi)
        assert abs(rect_prob(s, r, seed=i).value - empirical_rect_prob(x, r)) <= 0.01


@pytest.mark.parametrize("d,delta", [(1, 0.1), (5, 0.05), (20, 0.01)])
def test_max_norm_tail(d, delta):
    # c = 2 makes the union bound d * 2 exp(-2 log(d/delta)) <= delta
    rng = np.random.default_rng(d)
    s = corr(rng, d) * rng.uniform(0.5, 2.0)
    z = sample_mvn(np.linalg.cholesky(s), 10**5, seed=d)
    radius = gaussian_max_tail_radius(d, np.max(np.diag(s)), delta, c=2.0)
    assert np.mean(np.max(np.abs(z), axis=1) > radius) <= delta

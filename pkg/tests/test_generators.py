import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdslab.errors import InvalidInput, InvalidRegime, InvalidSpec, NoUniqueStationary
from mdslab.generators import (
    RADEMACHER,
    Bolthausen,
    GaussianSurrogate,
    IidGaussian,
    MarkovChainSpec,
    MarkovInduced,
    MdsPath,
    StandardNormal,
    TwoAtom,
    bolthausen_density,
    bolthausen_step_law,
    bolthausen_window,
    generate,
    is_reversible,
    markov_center,
    markov_sigma,
    simulate_markov,
    simulate_sums,
    stationary_and_gap,
    step_moments,
    stopping_time,
    yurinskii_augment,
)
from mdslab.kolmogorov import dk_density_vs_normal

THREE_P = np.array([[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5]])


def three_state_chain(seed=0, d=2):
    g = np.random.default_rng(seed).standard_normal((3, 3, d))
    return MarkovChainSpec.from_uncentred(THREE_P, np.full(3, 1 / 3), g)


class TestBolthausenLaw:
    def test_window_integer_bounds(self):
        for n in (1024, 1025, 4096, 5000, 65536, 99999):
            lo, hi = bolthausen_window(n)
            assert lo == math.floor(n - 2 * math.sqrt(n))
            assert hi == math.floor(n - math.sqrt(n))

    def test_small_n_rejected(self):
        with pytest.raises(InvalidRegime):
            bolthausen_window(1023)
        with pytest.raises(InvalidSpec):
            Bolthausen(0)

    def test_outside_window_is_normal(self):
        assert isinstance(bolthausen_step_law(2048, 4096, 3.0), StandardNormal)
        lo, hi = bolthausen_window(4096)
        assert isinstance(bolthausen_step_law(lo, 4096, 0.0), StandardNormal)
        assert isinstance(bolthausen_step_law(hi + 1, 4096, 0.0), StandardNormal)

    def test_lambda_formula(self):
        assert math.sqrt(1 - 3072 / 4096) == 0.5

    def test_window_regimes(self):
        n = 4096
        lo, hi = bolthausen_window(n)
        i = lo + 1
        lam = math.sqrt(1 - i / n)
        edge = math.sqrt(n) * lam / 4
        inside = bolthausen_step_law(i, n, edge)
        assert isinstance(inside, TwoAtom) and inside.p == pytest.approx(16 * lam**2)
        assert bolthausen_step_law(i, n, edge * (1 + 1e-12)) == RADEMACHER
        assert bolthausen_step_law(i, n, -2 * edge) == RADEMACHER

    def test_two_atom_closed_form(self):
        q = 0.16
        rho = math.sqrt((1 - q) / q)
        assert rho == pytest.approx(2.29129, abs=1e-5)
        assert -1 / rho == pytest.approx(-0.43644, abs=1e-5)
        law = TwoAtom(q, rho, -1 / rho)
        assert abs(law.mean) < 1e-15
        assert law.variance == pytest.approx(1.0, abs=1e-15)

    def test_index_range(self):
        with pytest.raises(InvalidInput):
            bolthausen_step_law(0, 4096, 0.0)


class TestPaths:
    def test_iid_path(self):
        p = generate(IidGaussian(np.eye(2)), 4, seed=1)
        assert p.increments.shape == (4, 2)
        np.testing.assert_array_equal(p.cond_covs, np.broadcast_to(np.eye(2), (4, 2, 2)))

    def test_bolthausen_path_structure(self):
        n = 4096
        p = generate(Bolthausen(3), n, seed=5)
        lo, hi = bolthausen_window(n)
        np.testing.assert_array_equal(p.terminal_qv() / n, np.eye(3))
        # window steps of coordinate 1 are atoms consistent with the regime at the realised partial sum
        s = np.concatenate([[0.0], np.cumsum(p.increments[:, 0])])
        for i in range(lo + 1, hi + 1):
            law = bolthausen_step_law(i, n, s[i - 1])
            assert p.increments[i - 1, 0] in (law.v_plus, law.v_minus)

    def test_bolthausen_extra_coordinates_normal(self):
        from scipy.stats import kstest

        x = simulate_sums(Bolthausen(3), 4096, 20000, np.random.default_rng(1)).sums
        for j in (1, 2):
            assert kstest(x[:, j], "norm").pvalue > 1e-3

    def test_surrogate_covariance(self):
        spec = GaussianSurrogate(np.diag([1.0, 4.0]))
        x = np.concatenate([generate(spec, 1000, seed=s).increments for s in range(100)])
        assert np.max(np.abs(np.cov(x, rowvar=False) - np.diag([1.0, 4.0]))) < 0.1

    def test_surrogate_length_mismatch(self):
        with pytest.raises(InvalidSpec):
            GaussianSurrogate(np.stack([np.eye(2)] * 3)).covs_for(5)

    def test_markov_path_covs(self):
        chain = three_state_chain()
        p = generate(MarkovInduced(chain), 50, seed=3)
        assert p.cond_covs.shape == (50, 2, 2)
        table = chain.state_covs()
        hits = [any(np.array_equal(v, t) for t in table) for v in p.cond_covs]
        assert all(hits)

    @pytest.mark.parametrize(
        "spec",
        [IidGaussian(np.eye(2)), Bolthausen(2), GaussianSurrogate(np.eye(2)), MarkovInduced(three_state_chain())],
        ids=lambda s: s.tag,
    )
    def test_generate_reproducible(self, spec):
        a = generate(spec, 1100, seed=42)
        b = generate(spec, 1100, seed=42)
        np.testing.assert_array_equal(a.increments, b.increments)


class TestBolthausenDensity:
    def test_mass_and_terminal_closeness(self):
        x, p = bolthausen_density(4096)
        assert p.sum() * (x[1] - x[0]) == pytest.approx(1.0, abs=1e-9)
        assert dk_density_vs_normal(x, p, 4096) < 1e-3

    def test_matches_simulation_at_window_end(self):
        n = 4096
        hi = bolthausen_window(n)[1]
        x, p = bolthausen_density(n, hi)
        F = np.cumsum(p) * (x[1] - x[0])
        s = np.sort(simulate_sums(Bolthausen(1), n, 100_000, np.random.default_rng(9), horizon=hi).sums[:, 0])
        emp = np.arange(1, s.size + 1) / s.size
        ks = np.max(np.abs(emp - np.interp(s * math.sqrt(hi), x, F)))
        assert ks < 1.63 / math.sqrt(s.size)  # 1% critical value

    def test_horizon_validation(self):
        with pytest.raises(InvalidInput):
            bolthausen_density(4096, 10)
        with pytest.raises(InvalidInput):
            simulate_sums(IidGaussian(np.eye(1)), 100, 10, np.random.default_rng(0), horizon=50)


class TestMartingaleProperty:
    """Regress X_k on bounded functions of the past; coefficients should be null."""

    @staticmethod
    def _null_coefficients(y, features):
        X = np.column_stack([np.ones(len(y))] + features)
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ beta
        bread = np.linalg.inv(X.T @ X)
        cov = bread @ (X.T * resid**2) @ X @ bread  # heteroscedasticity-robust
        return np.abs(beta) / np.sqrt(np.diag(cov))

    def test_bolthausen_window_steps(self):
        n, R = 1024, 10_000
        lo, hi = bolthausen_window(n)
        rng = np.random.default_rng(17)
        from mdslab.generators import _bolthausen_batch

        inc, _ = _bolthausen_batch(n, 1, R, rng, full=True)
        s = np.cumsum(inc[:, :, 0], axis=1)
        for i in (lo + 2, (lo + hi) // 2, hi):
            prev = s[:, i - 2] / math.sqrt(i)
            z = self._null_coefficients(inc[:, i - 1, 0], [np.tanh(prev), np.sign(prev), np.abs(prev) < 0.1])
            assert np.all(z < 3.5)

    def test_markov_steps(self):
        chain = three_state_chain(seed=4)
        _, _, states = simulate_markov(chain, 30, 10_000, np.random.default_rng(2), keep_states=True)
        for k in (1, 10, 29):
            prev = states[k - 1]
            y = chain.f_table[prev, states[k]]
            feats = [(prev == s).astype(float) for s in (1, 2)]
            if k >= 2:
                feats.append((states[k - 2] == 0).astype(float))
            for j in range(chain.d):
                assert np.all(self._null_coefficients(y[:, j], feats) < 3.5)


class TestMarkov:
    def test_center_examples(self):
        chain = three_state_chain()
        f = chain.f_table
        np.testing.assert_allclose(markov_center(f, THREE_P), f, atol=1e-15)
        np.testing.assert_array_equal(markov_center(np.full((3, 3), 2.5), THREE_P), np.zeros((3, 3)))
        assert np.max(np.abs(np.einsum("st,std->sd", THREE_P, f))) < 1e-14

    def test_rejects_bad_chains(self):
        with pytest.raises(InvalidSpec):
            MarkovChainSpec([[0.5, 0.6], [0.5, 0.5]], [0.5, 0.5], np.zeros((2, 2)))
        with pytest.raises(InvalidSpec):
            MarkovChainSpec([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5], np.ones((2, 2)))
        with pytest.raises(InvalidSpec):
            MarkovChainSpec([[0.5, 0.5], [0.5, 0.5]], [0.7, 0.7], np.zeros((2, 2)))

    def test_sigma_examples(self):
        P = np.full((2, 2), 0.5)
        assert markov_sigma(MarkovChainSpec(P, [0.5, 0.5], np.zeros((2, 2)))) == pytest.approx(np.zeros((1, 1)))
        f = np.array([[1.0, -1.0], [1.0, -1.0]])
        np.testing.assert_allclose(markov_sigma(MarkovChainSpec(P, [0.5, 0.5], f)), [[1.0]], atol=1e-15)

    def test_sigma_ergodic_average(self):
        chain = three_state_chain(seed=1)
        _, _, states = simulate_markov(chain, 200_000, 1, np.random.default_rng(0), keep_states=True)
        st_ = states[:, 0]
        x = chain.f_table[st_[:-1], st_[1:]]
        emp = x.T @ x / x.shape[0]
        assert np.max(np.abs(emp - markov_sigma(chain))) < 0.02

    def test_stationary_examples(self):
        mu, gap = stationary_and_gap(np.full((2, 2), 0.5))
        np.testing.assert_allclose(mu, [0.5, 0.5])
        assert gap == pytest.approx(1.0)
        mu, gap = stationary_and_gap(np.array([[0.9, 0.1], [0.1, 0.9]]))
        np.testing.assert_allclose(mu, [0.5, 0.5], atol=1e-12)
        assert gap == pytest.approx(0.2, abs=1e-12)
        with pytest.raises(NoUniqueStationary):
            stationary_and_gap(np.eye(2))
        with pytest.raises(NoUniqueStationary):
            stationary_and_gap(np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_nonreversible_warns(self):
        P = np.array([[0.0, 0.9, 0.1], [0.1, 0.0, 0.9], [0.9, 0.1, 0.0]])
        with pytest.warns(UserWarning):
            mu, _ = stationary_and_gap(P)
        assert not is_reversible(P, mu)

    @given(st.integers(0, 2**31), st.integers(2, 6))
    def test_stationary_property(self, seed, m):
        P = np.random.default_rng(seed).random((m, m)) + 0.05
        P /= P.sum(axis=1, keepdims=True)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mu, gap = stationary_and_gap(P)
        assert np.max(np.abs(mu @ P - mu)) <= 1e-12
        assert 0 < gap <= 1 and np.all(mu >= 0)

    def test_state_covariances_bracket(self):
        chain = three_state_chain(seed=2)
        mom = step_moments(MarkovInduced(chain), 100)
        ev = np.linalg.eigvalsh(chain.state_covs())
        assert mom.alpha == pytest.approx(ev[:, 0].min())
        assert mom.beta == pytest.approx(ev[:, -1].max())


class TestAugmentation:
    def _path(self, covs):
        return MdsPath(np.zeros((len(covs), covs.shape[1])), covs, "test")

    def test_no_truncation(self):
        n = 10
        covs = np.stack([np.eye(2) * 0.5] * n)
        path, tau = yurinskii_augment(self._path(covs), np.eye(2), 0.0, seed=1)
        assert tau == n
        np.testing.assert_allclose(path.cond_covs[n], n * np.eye(2) - covs.sum(axis=0))

    def test_exact_fit_zero_padding(self):
        n = 8
        path, tau = yurinskii_augment(self._path(np.stack([np.eye(2)] * n)), np.eye(2), 0.0, seed=3)
        assert tau == n
        np.testing.assert_array_equal(path.increments[n], np.zeros(2))

    def test_adversarial_cap(self):
        n = 100
        covs = np.stack([2.0 * np.eye(2)] * n)
        path, tau = yurinskii_augment(self._path(covs), 1.5 * np.eye(2), 0.0, seed=2)
        assert tau == math.floor(0.75 * n)
        np.testing.assert_allclose(path.terminal_qv(), n * 1.5 * np.eye(2), atol=1e-8)
        assert path.n == n + 1 and np.all(path.increments[tau:n] == 0)

    def test_negative_kappa(self):
        with pytest.raises(InvalidInput):
            yurinskii_augment(self._path(np.stack([np.eye(1)] * 3)), np.eye(1), -0.1, seed=0)

    @given(st.integers(0, 2**31), st.floats(0.0, 0.5))
    def test_terminal_qv_identity(self, seed, kappa):
        chain = three_state_chain(seed=seed % 7)
        path = generate(MarkovInduced(chain), 300, seed=seed)
        sigma = markov_sigma(chain)
        aug, tau = yurinskii_augment(path, sigma, kappa, seed=seed)
        assert 0 <= tau <= 300
        np.testing.assert_allclose(aug.terminal_qv(), 300 * (sigma + kappa * np.eye(2)), rtol=0, atol=1e-8)
        np.testing.assert_array_equal(aug.increments[:tau], path.increments[:tau])

    def test_stopping_time_prefix(self):
        cum = np.cumsum(np.concatenate([np.zeros((1, 1, 1)), np.ones((5, 1, 1))]), axis=0)
        assert stopping_time(cum, np.array([[3.5]])) == 3

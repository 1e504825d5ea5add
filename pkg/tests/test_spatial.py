import numpy as np
import pytest
from scipy.stats import kstest

from glcmbayes.lattice import UNIQUE_TRIANGLE, lattice_graph
from glcmbayes.spatial import (
    CarPrecision,
    car_precision,
    count_interval,
    round_latent,
    sample_mvn_precision,
    truncnorm_inverse_cdf,
)

from _oracles import truncnorm_cdf


class TestCarPrecision:
    def test_rho_zero_diagonal(self):
        g = lattice_graph(3, UNIQUE_TRIANGLE)
        car = car_precision(g, 0.0)
        assert np.allclose(car.dense, np.diag(g.D))
        assert np.isclose(car.logdet, np.log(g.D).sum())

    def test_logdet_matches_dense_cholesky(self):
        g = lattice_graph(3, UNIQUE_TRIANGLE)
        car = car_precision(g, 0.5)
        sign, logdet = np.linalg.slogdet(car.dense)
        assert sign > 0
        assert abs(car.logdet - logdet) < 1e-10

    def test_logdet_identity_random_graphs(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            K = int(rng.integers(2, 7))
            mode = rng.choice(["unique_triangle", "full_grid"])
            g = lattice_graph(K, mode)
            rho = float(rng.uniform(0, 0.999))
            car = car_precision(g, rho)
            _, logdet = np.linalg.slogdet(car.dense)
            assert abs(car.logdet - logdet) < 1e-8

    def test_near_one_stays_positive(self):
        g = lattice_graph(4, UNIQUE_TRIANGLE)
        car = car_precision(g, 0.999)
        evals = np.linalg.eigvalsh(car.dense)
        assert evals.min() > 0

    def test_rho_out_of_range(self):
        g = lattice_graph(3, UNIQUE_TRIANGLE)
        for rho in (-0.1, 1.0, 1.5):
            with pytest.raises(ValueError):
                car_precision(g, rho)


class TestSampleMvnPrecision:
    def test_diagonal_case_variance(self):
        # rho = 0 on a graph with D = 2 everywhere: independent N(0, 1/(2s))
        g = lattice_graph(2, "full_grid")
        car = car_precision(g, 0.0)
        rng = np.random.default_rng(1)
        scale = 4.0
        draws = np.array([sample_mvn_precision(np.zeros(4), scale, car, rng) for _ in range(100000)])
        target_var = 1.0 / (scale * 2.0)
        se = target_var * np.sqrt(2.0 / draws.shape[0])
        assert np.all(np.abs(draws.var(axis=0) - target_var) < 3 * se * 3)

    def test_covariance_matches_dense_inverse(self):
        g = lattice_graph(3, UNIQUE_TRIANGLE)  # n = 6
        car = car_precision(g, 0.6)
        rng = np.random.default_rng(2)
        scale = 0.8
        m = 100000
        draws = car.chol.solve_upper(rng.standard_normal((car.n, m))).T / np.sqrt(scale)
        target = np.linalg.inv(scale * car.dense)
        cov = np.cov(draws.T)
        se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / m)
        assert np.all(np.abs(cov - target) < 4 * se + 1e-12)

    def test_mean_shift(self):
        g = lattice_graph(2, UNIQUE_TRIANGLE)
        car = car_precision(g, 0.3)
        rng1 = np.random.default_rng(5)
        rng2 = np.random.default_rng(5)
        base = sample_mvn_precision(np.zeros(car.n), 1.0, car, rng1)
        shifted = sample_mvn_precision(np.full(car.n, 2.5), 1.0, car, rng2)
        assert np.allclose(shifted - base, 2.5)


class TestPriorCovarianceIdentity:
    def test_marginal_latent_covariance(self):
        # cov(gamma * theta + eps) = gamma^2 sigma2 Q^{-1} + tau2 I
        g = lattice_graph(3, UNIQUE_TRIANGLE)
        rho, sigma2, tau2, gamma = 0.4, 1.3, 0.6, 1.7
        car = car_precision(g, rho)
        rng = np.random.default_rng(3)
        m = 100000
        theta = car.chol.solve_upper(rng.standard_normal((car.n, m))).T * np.sqrt(sigma2)
        y = gamma * theta + np.sqrt(tau2) * rng.standard_normal((m, car.n))
        target = gamma**2 * sigma2 * np.linalg.inv(car.dense) + tau2 * np.eye(car.n)
        cov = np.cov(y.T)
        se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / m)
        assert np.all(np.abs(cov - target) < 4 * se)


class TestTruncnormInverseCdf:
    def test_median_untruncated(self):
        assert truncnorm_inverse_cdf(0.0, 1.0, -np.inf, np.inf, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_ks_against_cdf_oracle(self):
        rng = np.random.default_rng(4)
        u = rng.random(10000)
        draws = truncnorm_inverse_cdf(0.0, 1.0, 0.0, 1.0, u)
        assert np.all((draws >= 0.0) & (draws < 1.0))
        res = kstest(draws, lambda x: truncnorm_cdf(x, 0.0, 1.0, 0.0, 1.0))
        assert res.pvalue > 0.01

    def test_far_tail_is_finite(self):
        x = truncnorm_inverse_cdf(10.0, 1.0, -np.inf, 0.0, 0.37)
        assert np.isfinite(x) and x < 0

    def test_deep_tail_fallback_boundary(self):
        # interval mass underflows; nearest boundary returned, strictly inside
        x = truncnorm_inverse_cdf(0.0, 1.0, 50.0, 51.0, 0.5)
        assert 50.0 <= x < 51.0

    def test_upper_tail_reflection_accuracy(self):
        # interval [8, 9] far above the mean: still matches the oracle CDF
        rng = np.random.default_rng(9)
        u = rng.random(5000)
        draws = truncnorm_inverse_cdf(0.0, 1.0, 8.0, 9.0, u)
        assert np.all((draws >= 8.0) & (draws < 9.0))
        res = kstest(draws, lambda x: truncnorm_cdf(x, 0.0, 1.0, 8.0, 9.0))
        assert res.pvalue > 0.01

    def test_input_validation(self):
        with pytest.raises(ValueError):
            truncnorm_inverse_cdf(0.0, -1.0, 0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            truncnorm_inverse_cdf(0.0, 1.0, 2.0, 1.0, 0.5)


class TestRoundingMap:
    def test_interval_conventions(self):
        assert count_interval(0) == (-np.inf, 0.0)
        assert count_interval(1) == (0.0, 1.0)
        assert count_interval(7) == (6.0, 7.0)
        with pytest.raises(ValueError):
            count_interval(-1)

    def test_round_latent_boundaries(self):
        assert round_latent(-3.2) == 0
        assert round_latent(0.0) == 1
        assert round_latent(0.999) == 1
        assert round_latent(1.0) == 2

    def test_partition_sweep(self):
        for z in range(101):
            lo, hi = count_interval(z)
            lo_s = max(lo, -5.0)
            for y in np.linspace(lo_s, hi, 37, endpoint=False):
                assert round_latent(float(y)) == z
            assert round_latent(np.nextafter(hi, -np.inf)) == z

    def test_partition_covers_reals(self):
        ys = np.linspace(-10, 50, 20011)
        zs = round_latent(ys)
        los, his = count_interval(zs)
        assert np.all(ys >= los) and np.all(ys < his)

    def test_roundtrip_through_truncnorm(self):
        rng = np.random.default_rng(8)
        z = rng.integers(0, 40, size=500)
        lo, hi = count_interval(z)
        y = truncnorm_inverse_cdf(rng.normal(size=500) * 3, 2.0, lo, hi, rng.random(500))
        assert np.array_equal(round_latent(y), z)

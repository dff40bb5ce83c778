import numpy as np
import pytest

from rmtcov.datagen import (LDA_SHIFT, QDA_SHIFT, CovarianceModel, haar_orthogonal,
                            make_covariance, make_mixture, parse_model, rng_for,
                            sample, sample_mixture, toeplitz_covariance)
from rmtcov.errors import ConfigError
from rmtcov.metrics import fisher, true_delta
from rmtcov.spd import eig_sym, is_spd


class TestModels:
    def test_toeplitz_example(self):
        np.testing.assert_allclose(toeplitz_covariance(3, 0.5),
                                   [[1, .5, .25], [.5, 1, .5], [.25, .5, 1]])

    def test_discrete_spectrum(self):
        C = make_covariance(parse_model("discrete:.1,1,3,4", 8, 0))
        np.testing.assert_allclose(eig_sym(C).values, [.1, .1, 1, 1, 3, 3, 4, 4], atol=1e-12)

    def test_discrete_divisibility(self):
        with pytest.raises(ConfigError):
            parse_model("discrete:.1,1,3,4", 10)

    def test_wishart_unit_mean(self):
        means = []
        for seed in range(5):
            C = make_covariance(parse_model("wishart", 100, seed))
            assert eig_sym(C).values[0] > 0
            means.append(np.trace(C) / 100)
        assert np.mean(means) == pytest.approx(1.0, abs=0.2)

    def test_wishart_raw_scale(self):
        unit = make_covariance(CovarianceModel("wishart", 10, seed=3))
        raw = make_covariance(CovarianceModel("wishart", 10, seed=3, wishart_scale="raw"))
        np.testing.assert_allclose(raw, 20 * unit)

    @pytest.mark.parametrize("a", [0.2, 0.5, 0.8])
    def test_toeplitz_spectrum_bounds(self, a):
        w = eig_sym(toeplitz_covariance(200, a)).values
        assert w[0] >= (1 - a) / (1 + a) * 0.95
        assert w[-1] <= (1 + a) / (1 - a) * 1.05

    @pytest.mark.parametrize("text", ["wishart", "toeplitz:0.3", "discrete:1,2"])
    def test_all_spd(self, text):
        assert is_spd(make_covariance(parse_model(text, 20, 1)))

    @pytest.mark.parametrize("text", ["toeplitz:1.2", "toeplitz:x", "gamma", "discrete:"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_model(text, 20)

    def test_labels(self):
        assert parse_model("toeplitz:0.2", 4).label == "toeplitz:0.2"
        assert parse_model("discrete:.1,1", 4).label == "discrete:0.1,1"

    def test_haar(self):
        Q = haar_orthogonal(30, np.random.default_rng(0))
        np.testing.assert_allclose(Q.T @ Q, np.eye(30), atol=1e-12)


class TestSample:
    def test_lln(self):
        X = sample(np.eye(4), 100_000, 0)
        np.testing.assert_allclose(X @ X.T / 1e5, np.eye(4), atol=0.05)

    def test_deterministic(self):
        C = toeplitz_covariance(5, 0.3)
        np.testing.assert_array_equal(sample(C, 7, (1, 2)), sample(C, 7, (1, 2)))
        assert not np.array_equal(sample(C, 7, (1, 2)), sample(C, 7, (1, 3)))

    def test_rademacher(self):
        X = sample(np.eye(3), 50, 0, law="rademacher")
        assert set(np.unique(X)) == {-1.0, 1.0}

    def test_unknown_law(self):
        with pytest.raises(ConfigError):
            sample(np.eye(2), 5, 0, law="cauchy")

    def test_scm_distance_near_square(self):
        C = make_covariance(parse_model("discrete:.1,1,3,4", 200, 0))
        X = sample(C, 210, 1)
        assert 3.5 <= true_delta(X @ X.T / 210, C, fisher()) <= 3.9

    def test_trace_consistency(self):
        C = make_covariance(parse_model("toeplitz:0.6", 200, 0))
        X = sample(C, 400, 2)
        assert np.trace(X @ X.T / 400) / 200 == pytest.approx(np.trace(C) / 200, rel=0.03)

    def test_streams_independent(self):
        a = rng_for(5, 1).standard_normal(3)
        b = rng_for(5, 2).standard_normal(3)
        assert not np.allclose(a, b)


class TestMixture:
    def test_lda_shift(self):
        m = make_mixture(parse_model("wishart", 100, 1), parse_model("wishart", 100, 2),
                         50, 50, LDA_SHIFT)
        assert np.max(np.abs(m.mu2 - m.mu1)) == pytest.approx(0.8)
        np.testing.assert_array_equal(m.mu1, 0)

    def test_qda_shift(self):
        m = make_mixture(parse_model("toeplitz:0.2", 100), parse_model("toeplitz:0.4", 100),
                         50, 50, QDA_SHIFT)
        np.testing.assert_allclose(m.mu2, 0.01)

    def test_e1_direction(self):
        m = make_mixture(parse_model("toeplitz:0.2", 10), parse_model("toeplitz:0.2", 10),
                         5, 5, 10.0, direction="e1")
        np.testing.assert_allclose(m.mu2, np.eye(10)[0])

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            make_mixture(parse_model("wishart", 4), parse_model("wishart", 8), 5, 5, 1.0)

    def test_sample_shapes_and_means(self):
        m = make_mixture(parse_model("toeplitz:0.2", 6), parse_model("toeplitz:0.4", 6),
                         20000, 30000, 60.0)
        X1, X2 = sample_mixture(m, 3)
        assert X1.shape == (6, 20000) and X2.shape == (6, 30000)
        np.testing.assert_allclose(X2.mean(axis=1), 10.0, atol=0.05)
        np.testing.assert_allclose(X1.mean(axis=1), 0.0, atol=0.05)

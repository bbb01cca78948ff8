import math

import numpy as np
import pytest
from scipy import integrate

from vbcdhmm.dirichlet import (
    CONCENTRATION_FLOOR,
    DirichletPosterior,
    LatentPosteriors,
    ModelHyper,
    default_hyper,
    dirichlet_kl,
    dirichlet_mean,
    expected_log_probs,
    starred,
    starred_rows,
    update_dirichlet,
)
from vbcdhmm.exceptions import (
    DegenerateDataError,
    DimensionMismatchError,
    ValidationError,
)


class TestDefaultHyper:
    def test_documented_defaults(self):
        hyper = default_hyper(4, 2, 2, 3, np.zeros(3), np.eye(3))
        for name in ("alpha0", "alpha", "eta0", "eta_dep", "w"):
            assert np.all(getattr(hyper, name) == 1e-3)
        assert hyper.alpha.shape == (2, 2)
        assert hyper.eta_dep.shape == (2, 4, 4)
        assert hyper.w.shape == (4, 2)
        assert hyper.nw_lambda == 0.25
        assert hyper.nw_dof == 5
        np.testing.assert_array_equal(hyper.nw_scale, 5 * np.eye(3))

    def test_prior_precision_matches_data(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        hyper = default_hyper(2, 1, 1, 2, [1.0, -1.0], cov)
        precision = hyper.nw_dof * np.linalg.inv(hyper.nw_scale)
        np.testing.assert_allclose(precision, np.linalg.inv(cov), rtol=1e-12)
        np.testing.assert_array_equal(hyper.nw_mean, [1.0, -1.0])

    def test_scalar(self):
        hyper = default_hyper(1, 1, 1, 1, [0.0], [[1.0]])
        assert hyper.nw_dof == 3
        assert hyper.alpha0.shape == (1,)

    def test_non_symmetric_covariance(self):
        with pytest.raises(DegenerateDataError, match="degenerate data"):
            default_hyper(2, 2, 2, 2, np.zeros(2), [[1.0, 0.5], [0.0, 1.0]])

    def test_indefinite_covariance(self):
        with pytest.raises(DegenerateDataError):
            default_hyper(1, 1, 1, 2, np.zeros(2), [[1.0, 2.0], [2.0, 1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            default_hyper(1, 1, 1, 3, np.zeros(2), np.eye(2))


class TestModelHyper:
    def test_rejects_low_dof(self):
        hyper = default_hyper(2, 1, 2, 2, np.zeros(2), np.eye(2))
        with pytest.raises(ValidationError, match="nw_dof"):
            ModelHyper(**{**vars(hyper), "nw_dof": 0.5})

    def test_rejects_bad_shape(self):
        hyper = default_hyper(2, 1, 2, 2, np.zeros(2), np.eye(2))
        with pytest.raises(DimensionMismatchError, match="eta_dep"):
            ModelHyper(**{**vars(hyper), "eta_dep": np.ones((1, 2, 2))})

    def test_rejects_zero_concentration(self):
        hyper = default_hyper(2, 1, 2, 2, np.zeros(2), np.eye(2))
        with pytest.raises(ValidationError):
            ModelHyper(**{**vars(hyper), "alpha": np.zeros((2, 2))})


class TestExpectedLogProbs:
    def test_uniform_beta(self):
        np.testing.assert_allclose(expected_log_probs([1.0, 1.0]), [-1.0, -1.0])

    def test_symmetric(self):
        values = expected_log_probs(np.full(5, 0.7))
        assert np.all(values == values[0])

    def test_large_concentration(self):
        values = expected_log_probs([1e6, 1e6])
        np.testing.assert_allclose(values, math.log(0.5), atol=1e-5)

    def test_negative(self, rng):
        values = expected_log_probs(rng.uniform(0.01, 10, size=(4, 6)))
        assert np.all(np.isfinite(values))
        assert np.all(values < 0)


class TestStarred:
    def test_one_hot_limit(self):
        rows = starred_rows([1e8, 1e-3])
        assert rows[0] > 0.999
        assert 0 < rows[1] < 1e-300

    def test_uniform_lag_rows(self):
        post = LatentPosteriors(
            pi_hat=DirichletPosterior([1.0, 1.0]),
            A_hat=DirichletPosterior(np.ones((2, 2))),
            pi=DirichletPosterior([1.0, 2.0, 3.0]),
            A_dep=DirichletPosterior(np.ones((2, 3, 3))),
        )
        stars = starred(post, np.ones((3, 2)))
        np.testing.assert_allclose(stars.A_hat_star, math.exp(-1.0), rtol=1e-12)
        assert stars.c_star.shape == (3, 2)

    def test_subnormalized(self, rng):
        post = LatentPosteriors(
            pi_hat=DirichletPosterior(rng.uniform(0.01, 5, 3)),
            A_hat=DirichletPosterior(rng.uniform(0.01, 5, (3, 3))),
            pi=DirichletPosterior(rng.uniform(0.01, 5, 4)),
            A_dep=DirichletPosterior(rng.uniform(0.01, 5, (3, 4, 4))),
        )
        stars = starred(post, rng.uniform(0.01, 5, (4, 2)))
        for values in vars(stars).values():
            assert np.all(values > 0)
            assert np.all(values <= 1)
            assert np.all(values.sum(axis=-1) <= 1 + 1e-12)

    def test_monotone(self, rng):
        conc = rng.uniform(0.1, 3, 4)
        bigger = conc.copy()
        bigger[2] += 0.5
        assert starred_rows(bigger)[2] > starred_rows(conc)[2]

    def test_mixture_weights_must_match(self):
        post = LatentPosteriors.from_prior(
            default_hyper(3, 1, 1, 1, [0.0], [[1.0]])
        )
        with pytest.raises(DimensionMismatchError):
            starred(post, np.ones((2, 1)))


class TestDirichletKL:
    def test_identical(self, rng):
        conc = rng.uniform(0.01, 10, (3, 5))
        assert abs(dirichlet_kl(DirichletPosterior(conc), conc)) <= 1e-12

    def test_beta_quadrature(self):
        def integrand(p):
            density = 5 * p**4
            return density * math.log(density)

        expected, _ = integrate.quad(integrand, 0, 1, epsabs=1e-13, epsrel=1e-13)
        assert dirichlet_kl([5.0, 1.0], [1.0, 1.0]) == pytest.approx(expected, abs=1e-8)

    def test_positive(self, rng):
        for _ in range(10):
            q = rng.uniform(0.05, 5, 4)
            p = rng.uniform(0.05, 5, 4)
            assert dirichlet_kl(q, p) > 0

    def test_batch_is_summed(self):
        rows = np.array([[5.0, 1.0], [2.0, 3.0]])
        prior = np.ones((2, 2))
        assert dirichlet_kl(rows, prior) == pytest.approx(
            dirichlet_kl(rows[0], prior[0]) + dirichlet_kl(rows[1], prior[1])
        )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            dirichlet_kl([1.0, 1.0], [1.0, 1.0, 1.0])


class TestUpdate:
    def test_adds_counts(self):
        post = update_dirichlet([1e-3, 1e-3], [3.2, 0.0])
        assert post.concentration[0] == pytest.approx(3.201, abs=1e-12)
        assert post.concentration[1] == 1e-3

    def test_floor(self):
        post = update_dirichlet([1e-12], [0.0])
        assert post.concentration[0] == CONCENTRATION_FLOOR

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            update_dirichlet(np.ones(3), np.ones(2))

    def test_rejects_non_positive(self):
        with pytest.raises(ValidationError):
            DirichletPosterior([1.0, 0.0])

    def test_mean(self):
        np.testing.assert_allclose(dirichlet_mean([[1.0, 3.0]]), [[0.25, 0.75]])


class TestLatentPosteriors:
    def test_from_prior(self):
        hyper = default_hyper(3, 2, 2, 1, [0.0], [[1.0]])
        post = LatentPosteriors.from_prior(hyper)
        post.check(hyper)
        assert (post.max_lag, post.n_states) == (2, 3)
        np.testing.assert_allclose(post.mean_A_hat(), 0.5)
        np.testing.assert_allclose(post.mean_A_dep(), 1 / 3)

    def test_check_mismatch(self):
        post = LatentPosteriors.from_prior(default_hyper(3, 1, 2, 1, [0.0], [[1.0]]))
        with pytest.raises(DimensionMismatchError):
            post.check(default_hyper(3, 1, 1, 1, [0.0], [[1.0]]))

    def test_shape_consistency(self):
        with pytest.raises(DimensionMismatchError):
            LatentPosteriors(
                pi_hat=DirichletPosterior(np.ones(2)),
                A_hat=DirichletPosterior(np.ones((3, 3))),
                pi=DirichletPosterior(np.ones(2)),
                A_dep=DirichletPosterior(np.ones((2, 2, 2))),
            )

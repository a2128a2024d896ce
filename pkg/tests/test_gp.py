import math

import numpy as np
import pytest

from mesmoc.gp import (
    FitConfig,
    KernelHyperparams,
    NotPositiveDefiniteError,
    SampledFunction,
    _cholesky_with_jitter,
    condition,
    evaluate_sampled,
    fit,
    fit_output,
    kernel_matrix,
    log_marginal_likelihood,
    posterior,
    refit_fixed,
    sample_posterior_function,
    se_kernel,
    stack_sampled,
)
from mesmoc.problem import Dataset, OutputVector, ProblemSpec

HP1 = KernelHyperparams([1.0], 1.0, 1e-2)


def dense_oracle(hp, X, y, xq, mean=0.0):
    n = len(y)
    K = np.array([[se_kernel(a, b, hp) for b in X] for a in X]) + hp.noise_variance * np.eye(n)
    k = np.array([se_kernel(a, xq, hp) for a in X])
    Kinv = np.linalg.inv(K)
    mu = mean + k @ Kinv @ (y - mean)
    var = se_kernel(xq, xq, hp) - k @ Kinv @ k
    lml = -0.5 * (y - mean) @ Kinv @ (y - mean) - 0.5 * math.log(np.linalg.det(K)) - 0.5 * n * math.log(2 * math.pi)
    return mu, var, lml


class TestKernel:
    def test_examples(self):
        hp = KernelHyperparams([1.0, 1.0], 2.5, 0.0)
        assert se_kernel([0.3, 0.1], [0.3, 0.1], hp) == 2.5
        unit = KernelHyperparams([1.0, 1.0], 1.0, 0.0)
        assert se_kernel([0.0, 0.0], [1.0, 1.0], unit) == pytest.approx(math.exp(-1), abs=1e-15)
        assert se_kernel([0.0, 0.0], [1e3, 0.0], unit) == 0.0

    def test_matrix_matches_pointwise(self):
        rng = np.random.default_rng(0)
        hp = KernelHyperparams([0.5, 2.0, 1.0], 1.7, 0.0)
        A, B = rng.normal(size=(6, 3)), rng.normal(size=(4, 3))
        expected = np.array([[se_kernel(a, b, hp) for b in B] for a in A])
        np.testing.assert_allclose(kernel_matrix(A, B, hp), expected, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            se_kernel([0.0], [0.0, 1.0], HP1)

    def test_invalid_hyperparams(self):
        with pytest.raises(ValueError):
            KernelHyperparams([0.0], 1.0, 0.0)
        with pytest.raises(ValueError):
            KernelHyperparams([1.0], 1.0, -1e-3)


class TestPosterior:
    def test_prior(self):
        hp = KernelHyperparams([0.7, 0.7], 3.0, 1e-3)
        m = posterior(condition(hp, np.zeros((0, 2)), []), np.array([0.2, 0.4]))
        assert m.mean == 0.0 and m.variance == 3.0

    def test_near_noiseless_interpolation(self):
        hp = KernelHyperparams([0.5], 1.0, 1e-12)
        X = np.array([[0.0], [0.6], [1.5]])
        y = np.array([0.3, -1.2, 0.8])
        m = posterior(condition(hp, X, y), X[1])
        assert abs(m.mean - y[1]) <= 1e-4 and m.variance <= 1e-6

    def test_three_point_dense_oracle(self):
        rng = np.random.default_rng(1)
        hp = KernelHyperparams([0.8, 1.3], 1.4, 0.05)
        X, y, xq = rng.normal(size=(3, 2)), rng.normal(size=3), rng.normal(size=2)
        mu, var, lml = dense_oracle(hp, X, y, xq, mean=0.4)
        model = condition(hp, X, y, mean=0.4)
        m = posterior(model, xq)
        assert abs(m.mean - mu) <= 1e-8 and abs(m.variance - var) <= 1e-8
        assert abs(log_marginal_likelihood(model) - lml) <= 1e-8

    def test_lml_examples(self):
        noise = 0.3
        model = condition(KernelHyperparams([1.0], 1.0, noise), [[0.0]], [0.0])
        assert log_marginal_likelihood(model) == pytest.approx(-0.5 * math.log(2 * math.pi * (1 + noise)), abs=1e-14)
        rng = np.random.default_rng(2)
        X = rng.normal(size=(5, 1))
        model = condition(HP1, X, np.zeros(5))
        expected = -np.sum(np.log(np.diag(model.chol))) - 2.5 * math.log(2 * math.pi)
        assert log_marginal_likelihood(model) == pytest.approx(expected, abs=1e-12)

    def test_jitter_escalation_on_duplicates(self):
        hp = KernelHyperparams([1.0], 1.0, 0.0)
        model = condition(hp, [[0.5], [0.5], [0.5]], [1.0, 1.0, 1.0])
        assert model.jitter > 0
        with pytest.raises(NotPositiveDefiniteError):
            _cholesky_with_jitter(-np.eye(3))

    def test_variance_is_clipped_at_zero(self):
        model = condition(KernelHyperparams([1.0], 1.0, 0.0), [[0.0], [1e-9]], [0.0, 0.0])
        assert np.all(model.predict([[0.0], [5e-10]])[1] >= 0)


class TestFit:
    def test_recovers_lengthscale(self):
        rng = np.random.default_rng(3)
        hp = KernelHyperparams([0.5], 1.0, 1e-4)
        X = rng.uniform(0, 5, (200, 1))
        K = kernel_matrix(X, X, hp) + 1e-4 * np.eye(200)
        y = np.linalg.cholesky(K) @ rng.standard_normal(200)
        model = fit(X, y, [0.0], [5.0], rng=0)
        assert 0.35 <= model.hyperparams.lengthscales[0] <= 0.7

    def test_duplicate_inputs_force_noise(self):
        model = fit([[0.2], [0.2], [0.8]], [0.0, 1.0, 0.5], [0.0], [1.0], rng=0)
        assert model.hyperparams.noise_variance > 1e-3

    def test_two_observations(self):
        model = fit([[0.0, 0.0], [1.0, 1.0]], [1.0, 2.0], rng=0)
        mu, var = model.predict([[0.5, 0.5]])
        assert np.isfinite(mu).all() and np.isfinite(var).all() and model.mean == 1.5

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            fit([[0.0]], [1.0])

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(4)
        X, y = rng.random((12, 2)), rng.normal(size=12)
        a, b = fit(X, y, rng=7), fit(X, y, rng=7)
        np.testing.assert_array_equal(a.hyperparams.lengthscales, b.hyperparams.lengthscales)
        assert a.hyperparams.noise_variance == b.hyperparams.noise_variance

    def test_fit_beats_starting_point(self):
        rng = np.random.default_rng(5)
        X = rng.random((25, 2))
        y = np.sin(6 * X[:, 0]) + X[:, 1] ** 2
        model = fit(X, y, [0, 0], [1, 1], FitConfig(restarts=3), rng=0)
        start = condition(KernelHyperparams([0.3, 0.3], np.var(y), 1e-3 * np.var(y)), X, y, np.mean(y))
        assert log_marginal_likelihood(model) >= log_marginal_likelihood(start)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(6)
        X = rng.random((15, 1))
        y = np.sin(5 * X[:, 0])
        a = fit(X, y, [0], [1], rng=0)
        b = fit(X, 1000 * y + 50, [0], [1], rng=0)
        np.testing.assert_allclose(b.predict(X)[0], 1000 * a.predict(X)[0] + 50, rtol=1e-5, atol=1e-4)

    def test_fit_output_and_refit_fixed(self):
        spec = ProblemSpec(dim=1, num_objectives=2, bounds=[[0, 1]])
        data = Dataset(spec)
        for x in np.linspace(0, 1, 6):
            data.append([x], OutputVector([np.sin(3 * x), x**2]))
        model = fit_output(data, 1, rng=0)
        np.testing.assert_array_equal(model.y, data.Y[:, 1])
        X2 = np.vstack([data.X, [[0.55]]])
        y2 = np.append(data.Y[:, 1], 0.3)
        again = refit_fixed(model, X2, y2)
        assert again.hyperparams is model.hyperparams and again.mean == pytest.approx(np.mean(y2))


class TestSampling:
    def test_evaluate_sampled_examples(self):
        zero = SampledFunction(np.ones((3, 2)), np.zeros(3), np.zeros(3), 1.0)
        assert evaluate_sampled(zero, np.array([0.2, 0.3])) == 0.0
        single = SampledFunction(np.array([[1.0, -1.0]]), np.zeros(1), np.array([0.7]), 2.0)
        assert evaluate_sampled(single, np.array([0.4, 0.4])) == pytest.approx(1.4)
        with pytest.raises(ValueError):
            evaluate_sampled(single, np.array([0.4]))

    def test_same_seed_same_function(self):
        model = condition(HP1, [[0.0], [1.0]], [0.5, -0.5])
        a = sample_posterior_function(model, 100, 9)
        b = sample_posterior_function(model, 100, 9)
        np.testing.assert_array_equal(a.weights, b.weights)
        x = np.array([0.3])
        assert evaluate_sampled(a, x) == evaluate_sampled(a, x) == evaluate_sampled(b, x)

    def test_posterior_samples_at_training_point(self):
        hp = KernelHyperparams([0.5], 1.0, 1e-6)
        X = np.array([[0.0], [0.4], [1.1]])
        y = np.array([0.2, -0.7, 1.0])
        model = condition(hp, X, y)
        sd = posterior(model, X[1]).std
        rng = np.random.default_rng(10)
        vals = np.array([sample_posterior_function(model, 500, rng)(X[1:2])[0] for _ in range(2000)])
        assert np.mean(np.abs(vals - y[1]) <= 3 * max(sd, math.sqrt(hp.noise_variance))) >= 0.99

    def test_posterior_sample_moments(self):
        hp = KernelHyperparams([0.6, 0.6], 2.0, 1e-2)
        rng = np.random.default_rng(11)
        X, y = rng.random((6, 2)), rng.normal(size=6)
        model = condition(hp, X, y, mean=0.3)
        Xq = rng.random((4, 2))
        draws = np.array([sample_posterior_function(model, 800, rng)(Xq) for _ in range(4000)])
        mu, var = model.predict(Xq)
        np.testing.assert_allclose(draws.mean(0), mu, atol=4 * np.sqrt(var.max() / 4000) + 0.02)
        np.testing.assert_allclose(draws.var(0), var, atol=0.1 * var.max() + 0.01)

    def test_stacked_evaluation(self):
        model = condition(HP1, [[0.0], [1.0]], [0.5, -0.5])
        fns = [sample_posterior_function(model, 50, s) for s in range(3)]
        X = np.linspace(-1, 2, 17)[:, None]
        exact = np.column_stack([f(X) for f in fns])
        np.testing.assert_allclose(stack_sampled(fns)(X), exact, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(stack_sampled(fns, single_precision=True)(X), exact, atol=1e-4)

    def test_needs_a_feature(self):
        with pytest.raises(ValueError):
            sample_posterior_function(condition(HP1, [], []), 0)

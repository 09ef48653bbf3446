import numpy as np
import pytest

from fedpred import (
    Architecture,
    ClassificationSummary,
    LikelihoodSpec,
    PosteriorSamples,
    PriorMode,
    PriorPredictiveConfig,
    RegressionSummary,
    Task,
    predict_ensemble,
    prior_predictive,
)


def _regression_samples(arch, rows):
    return PosteriorSamples(0, arch, dataset_size=10, samples=np.asarray(rows, dtype=float))


class TestPredictEnsembleRegression:
    @pytest.fixture
    def linear_arch(self):
        # Single linear unit: output = w * x + b with params [w, b].
        return Architecture((1, 1), Task.REGRESSION)

    def test_identical_samples_give_noise_variance(self, linear_arch):
        samples = _regression_samples(linear_arch, [[1.0, 0.0]] * 5)
        lik = LikelihoodSpec(noise_variance=0.1)
        out = predict_ensemble(samples, np.array([[2.0]]), lik)
        assert out.mean[0, 0] == pytest.approx(2.0)
        assert out.var[0, 0] == pytest.approx(0.1)

    def test_two_point_unbiased_variance(self, linear_arch):
        # Predictions 0 and 2 at x=0 (biases 0 and 2): mean 1, var 2 + 0.1.
        samples = _regression_samples(linear_arch, [[1.0, 0.0], [1.0, 2.0]])
        out = predict_ensemble(samples, np.array([[0.0]]), LikelihoodSpec(noise_variance=0.1))
        assert out.mean[0, 0] == pytest.approx(1.0)
        assert out.var[0, 0] == pytest.approx(2.1)

    def test_single_sample_variance_is_noise(self, linear_arch):
        samples = _regression_samples(linear_arch, [[3.0, -1.0]])
        out = predict_ensemble(samples, np.array([[1.0]]), LikelihoodSpec(noise_variance=0.25))
        assert out.var[0, 0] == pytest.approx(0.25)

    def test_variance_at_least_noise(self, linear_arch, rng):
        samples = _regression_samples(linear_arch, rng.normal(size=(7, 2)))
        out = predict_ensemble(samples, rng.normal(size=(9, 1)), LikelihoodSpec(noise_variance=0.3))
        assert np.all(out.var >= 0.3)

    def test_sample_order_invariant(self, linear_arch, rng):
        rows = rng.normal(size=(6, 2))
        lik = LikelihoodSpec()
        x = rng.normal(size=(4, 1))
        a = predict_ensemble(_regression_samples(linear_arch, rows), x, lik)
        b = predict_ensemble(_regression_samples(linear_arch, rows[::-1]), x, lik)
        assert np.allclose(a.mean, b.mean)
        assert np.allclose(a.var, b.var)


class TestPredictEnsembleClassification:
    def test_mean_of_per_sample_probs(self):
        # Two-logit linear net on 1-D input; weights chosen so that softmax
        # yields (0.9, 0.1) and (0.5, 0.5) at x = 1.
        arch = Architecture((1, 2), Task.CLASSIFICATION)
        logit_gap = np.log(0.9 / 0.1)
        rows = [[logit_gap, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]
        samples = PosteriorSamples(0, arch, 10, np.asarray(rows))
        out = predict_ensemble(samples, np.array([[1.0]]), LikelihoodSpec())
        assert out.probs[0] == pytest.approx([0.7, 0.3], rel=1e-9)

    def test_rows_sum_to_one(self, small_classification_arch, rng):
        samples = PosteriorSamples(
            0, small_classification_arch, 10,
            rng.normal(size=(5, small_classification_arch.parameter_count)),
        )
        out = predict_ensemble(samples, rng.normal(size=(11, 2)), LikelihoodSpec())
        assert np.max(np.abs(out.probs.sum(axis=1) - 1.0)) < 1e-9


class TestPriorPredictive:
    def test_uniform_classes(self, small_classification_arch):
        cfg = PriorPredictiveConfig(mode=PriorMode.UNIFORM_CLASSES)
        out = prior_predictive(small_classification_arch, LikelihoodSpec(), np.zeros((4, 2)), cfg)
        assert np.array_equal(out.probs, np.full((4, 3), 1 / 3))

    def test_fixed_gaussian_verbatim(self, small_regression_arch):
        cfg = PriorPredictiveConfig(
            mode=PriorMode.FIXED_GAUSSIAN, mean=np.zeros(1), variance=np.full(1, 100.0)
        )
        out = prior_predictive(small_regression_arch, LikelihoodSpec(), np.zeros((3, 2)), cfg)
        assert np.all(out.mean == 0.0)
        assert np.all(out.var == 100.0)

    def test_sampled_prior_uniform_for_symmetric_net(self, small_classification_arch):
        # Zero prior draws force zero logits, hence exactly uniform probs.
        lik = LikelihoodSpec(prior_variance=1e-30)
        cfg = PriorPredictiveConfig(mode=PriorMode.SAMPLED_PRIOR, sample_count=5)
        out = prior_predictive(small_classification_arch, lik, np.ones((2, 2)), cfg, seed=0)
        assert out.probs == pytest.approx(np.full((2, 3), 1 / 3), abs=1e-12)

    def test_sampled_prior_deterministic(self, small_regression_arch):
        lik = LikelihoodSpec()
        cfg = PriorPredictiveConfig(mode=PriorMode.SAMPLED_PRIOR, sample_count=8)
        x = np.ones((3, 2))
        a = prior_predictive(small_regression_arch, lik, x, cfg, seed=42)
        b = prior_predictive(small_regression_arch, lik, x, cfg, seed=42)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.var, b.var)

    def test_sampled_prior_regression_needs_two_draws(self, small_regression_arch):
        cfg = PriorPredictiveConfig(mode=PriorMode.SAMPLED_PRIOR, sample_count=1)
        with pytest.raises(ValueError):
            prior_predictive(small_regression_arch, LikelihoodSpec(), np.ones((1, 2)), cfg)

    def test_fixed_gaussian_requires_moments(self):
        with pytest.raises(ValueError):
            PriorPredictiveConfig(mode=PriorMode.FIXED_GAUSSIAN)


class TestSummaryValidation:
    def test_regression_var_positive(self):
        with pytest.raises(ValueError):
            RegressionSummary(np.zeros((1, 1)), np.zeros((1, 1)))

    def test_classification_probs_normalized(self):
        with pytest.raises(ValueError):
            ClassificationSummary(np.array([[0.5, 0.4]]))

    def test_classification_probs_nonnegative(self):
        with pytest.raises(ValueError):
            ClassificationSummary(np.array([[1.2, -0.2]]))

import math

import numpy as np
import pytest

from fedpred.metrics import (
    metric_accuracy,
    metric_ece,
    metric_mse,
    metric_nll_classification,
    metric_nll_regression,
)


class TestAccuracy:
    def test_perfect_one_hots(self):
        probs = np.eye(4)
        assert metric_accuracy(probs, np.arange(4)) == 1.0

    def test_uniform_probs_tie_to_lowest_index(self):
        probs = np.full((10, 2), 0.5)
        labels = np.array([0, 1] * 5)
        # argmax ties break to index 0, so exactly the class-0 rows score.
        assert metric_accuracy(probs, labels) == 0.5

    def test_fractional(self):
        probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
        assert metric_accuracy(probs, np.array([0, 0, 0])) == pytest.approx(2 / 3)


class TestMse:
    def test_constant_predictor_gives_target_variance(self):
        gen = np.random.default_rng(0)
        targets = gen.normal(size=(10, 1))
        targets -= targets.mean()
        means = np.zeros((10, 1))
        assert metric_mse(means, targets) == pytest.approx(float(targets.var()))

    def test_exact_predictions(self):
        t = np.arange(5.0)[:, None]
        assert metric_mse(t.copy(), t) == 0.0


class TestNll:
    def test_standard_normal_at_zero(self):
        nll = metric_nll_regression(np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 1)))
        assert nll == pytest.approx(0.5 * math.log(2 * math.pi))

    def test_regression_penalizes_distance(self):
        close = metric_nll_regression(np.zeros((1, 1)), np.ones((1, 1)), np.array([[0.1]]))
        far = metric_nll_regression(np.zeros((1, 1)), np.ones((1, 1)), np.array([[2.0]]))
        assert far > close

    def test_classification_floor(self):
        probs = np.array([[1.0, 0.0]])
        nll = metric_nll_classification(probs, np.array([1]), prob_floor=1e-6)
        assert nll == pytest.approx(-math.log(1e-6))

    def test_classification_mean(self):
        probs = np.array([[0.5, 0.5], [0.25, 0.75]])
        nll = metric_nll_classification(probs, np.array([0, 1]))
        assert nll == pytest.approx(-(math.log(0.5) + math.log(0.75)) / 2)


class TestEce:
    def test_perfectly_calibrated_single_bin(self):
        # All confidences 0.8 and exactly 80% correct: zero gap.
        probs = np.tile(np.array([[0.8, 0.2]]), (10, 1))
        labels = np.array([0] * 8 + [1] * 2)
        assert metric_ece(probs, labels, bins=15) == pytest.approx(0.0)

    def test_hand_computed_two_bins(self):
        # Bin arithmetic with bins=2: rows with confidence 0.6 land in the top
        # bin; rows with 0.45... -> wait, max prob is always >= 0.5 for K=2,
        # so use bins=4 and confidences 0.6 (bin 2) and 0.9 (bin 3).
        probs = np.array([
            [0.6, 0.4],   # correct
            [0.6, 0.4],   # wrong
            [0.9, 0.1],   # correct
            [0.9, 0.1],   # correct
        ])
        labels = np.array([0, 1, 0, 0])
        # bin 2: conf 0.6, acc 0.5, weight 0.5 -> 0.05
        # bin 3: conf 0.9, acc 1.0, weight 0.5 -> 0.05
        assert metric_ece(probs, labels, bins=4) == pytest.approx(0.1)

    def test_confidence_one_lands_in_top_bin(self):
        probs = np.array([[1.0, 0.0]])
        assert metric_ece(probs, np.array([0]), bins=15) == pytest.approx(0.0)

    def test_overconfident_wrong_predictions(self):
        probs = np.tile(np.array([[0.99, 0.01]]), (4, 1))
        labels = np.ones(4, dtype=int)
        assert metric_ece(probs, labels, bins=15) == pytest.approx(0.99)

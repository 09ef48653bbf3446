"""Evaluation metrics: accuracy, MSE, negative log likelihood, and expected
calibration error."""

from __future__ import annotations

import math

import numpy as np


def metric_accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax matches the label; ties break low."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    preds = np.argmax(probs, axis=1)
    return float(np.mean(preds == labels))


def metric_mse(means: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error of predictive means, in the units of the targets."""
    means = np.asarray(means, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).reshape(means.shape)
    return float(np.mean((means - targets) ** 2))


def metric_nll_regression(means: np.ndarray, variances: np.ndarray, targets: np.ndarray) -> float:
    """Mean Gaussian negative log density of the targets, summed over outputs."""
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    variances = np.atleast_2d(np.asarray(variances, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(means.shape)
    per_point = 0.5 * (np.log(2.0 * math.pi * variances) + (targets - means) ** 2 / variances)
    return float(per_point.sum(axis=1).mean())


def metric_nll_classification(
    probs: np.ndarray, labels: np.ndarray, prob_floor: float = 1e-6
) -> float:
    """Mean negative log probability of the true class, floored before the log."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    p_true = probs[np.arange(probs.shape[0]), labels]
    return float(-np.log(np.maximum(p_true, prob_floor)).mean())


def metric_ece(probs: np.ndarray, labels: np.ndarray, bins: int = 15) -> float:
    """Expected calibration error with equal-width bins over max-probability.

    Bin index is min(floor(confidence * bins), bins - 1), so confidence 1.0
    lands in the top bin.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    confidences = probs.max(axis=1)
    correct = (np.argmax(probs, axis=1) == labels).astype(np.float64)
    idx = np.minimum((confidences * bins).astype(np.int64), bins - 1)
    total = probs.shape[0]
    ece = 0.0
    for b in range(bins):
        mask = idx == b
        count = int(mask.sum())
        if count == 0:
            continue
        gap = abs(correct[mask].mean() - confidences[mask].mean())
        ece += (count / total) * gap
    return float(ece)

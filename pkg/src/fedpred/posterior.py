"""Turn posterior samples into predictive posteriors, and build the prior
predictive distribution that the aggregation rules divide by."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .nn import Architecture, LikelihoodSpec, ModelParams, Task, forward, softmax
from .sampler import PosteriorSamples


@dataclass(frozen=True)
class RegressionSummary:
    """Per-query Gaussian predictive summary: mean and variance, (b, out_dim)."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_2d(np.asarray(self.mean, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.var, dtype=np.float64))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)
        if mean.shape != var.shape:
            raise ValueError(f"mean shape {mean.shape} != var shape {var.shape}")
        if not np.all(var > 0.0):
            raise ValueError("predictive variances must be strictly positive")


@dataclass(frozen=True)
class ClassificationSummary:
    """Per-query class-probability vectors, (b, K)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.atleast_2d(np.asarray(self.probs, dtype=np.float64))
        object.__setattr__(self, "probs", probs)
        if np.any(probs < 0.0):
            raise ValueError("probabilities must be nonnegative")
        sums = probs.sum(axis=1)
        if not np.all(np.abs(sums - 1.0) < 1e-9):
            raise ValueError("probability rows must sum to 1 within 1e-9")


PredictiveSummary = RegressionSummary | ClassificationSummary


class PriorMode(str, Enum):
    UNIFORM_CLASSES = "uniform"
    SAMPLED_PRIOR = "sampled"
    FIXED_GAUSSIAN = "fixed_gaussian"


@dataclass(frozen=True)
class PriorPredictiveConfig:
    mode: PriorMode
    mean: np.ndarray | None = None
    variance: np.ndarray | None = None
    sample_count: int = 32

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", PriorMode(self.mode))
        if self.mean is not None:
            object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).ravel())
        if self.variance is not None:
            variance = np.asarray(self.variance, dtype=np.float64).ravel()
            if not np.all(variance > 0.0):
                raise ValueError("prior predictive variance must be positive")
            object.__setattr__(self, "variance", variance)
        if self.mode is PriorMode.FIXED_GAUSSIAN and (self.mean is None or self.variance is None):
            raise ValueError("FIXED_GAUSSIAN prior needs both mean and variance")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")


def _ensemble_summary(
    member_outputs: np.ndarray, task: Task, noise_variance: float
) -> PredictiveSummary:
    """Combine per-member raw outputs (S, b, out) into a predictive summary."""
    if task is Task.CLASSIFICATION:
        probs = softmax(member_outputs).mean(axis=0)
        return ClassificationSummary(probs)
    mean = member_outputs.mean(axis=0)
    if member_outputs.shape[0] >= 2:
        spread = member_outputs.var(axis=0, ddof=1)
    else:
        spread = np.zeros_like(mean)
    return RegressionSummary(mean, spread + noise_variance)


def predict_ensemble(
    samples: PosteriorSamples, inputs: np.ndarray, lik: LikelihoodSpec
) -> PredictiveSummary:
    """Monte-Carlo predictive posterior from a set of parameter draws.

    Classification: the softmax outputs averaged over draws. Regression: the
    per-output sample mean, and the unbiased sample variance of the means plus
    the observation noise (law of total variance); with a single draw the
    variance is the observation noise alone.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    outputs = np.stack(
        [forward(samples.param(j), inputs) for j in range(len(samples))], axis=0
    )
    return _ensemble_summary(outputs, samples.arch.task, lik.noise_variance)


def prior_predictive(
    arch: Architecture,
    lik: LikelihoodSpec,
    inputs: np.ndarray,
    cfg: PriorPredictiveConfig,
    seed: int = 0,
) -> PredictiveSummary:
    """Predictive distribution induced by the weight prior before any data.

    UNIFORM_CLASSES ignores the inputs and returns 1/K per class;
    FIXED_GAUSSIAN returns the configured mean/variance verbatim at every
    query point; SAMPLED_PRIOR draws parameter vectors from the weight prior
    and applies the ensemble rule, deterministic in the seed.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    b = inputs.shape[0]
    if cfg.mode is PriorMode.UNIFORM_CLASSES:
        if arch.task is not Task.CLASSIFICATION:
            raise ValueError("UNIFORM_CLASSES prior only applies to classification")
        k = arch.output_dim
        return ClassificationSummary(np.full((b, k), 1.0 / k))
    if cfg.mode is PriorMode.FIXED_GAUSSIAN:
        if arch.task is not Task.REGRESSION:
            raise ValueError("FIXED_GAUSSIAN prior only applies to regression")
        assert cfg.mean is not None and cfg.variance is not None
        if cfg.mean.shape[0] != arch.output_dim or cfg.variance.shape[0] != arch.output_dim:
            raise ValueError("prior mean/variance dimension must match the output dim")
        mean = np.broadcast_to(cfg.mean, (b, arch.output_dim)).copy()
        var = np.broadcast_to(cfg.variance, (b, arch.output_dim)).copy()
        return RegressionSummary(mean, var)
    # SAMPLED_PRIOR
    if arch.task is Task.REGRESSION and cfg.sample_count < 2:
        raise ValueError("SAMPLED_PRIOR regression needs at least 2 prior draws")
    rng = np.random.default_rng(seed)
    scale = math.sqrt(lik.prior_variance)
    outputs = np.empty((cfg.sample_count, b, arch.output_dim))
    for j in range(cfg.sample_count):
        params = ModelParams(rng.normal(0.0, scale, size=arch.parameter_count), arch)
        outputs[j] = forward(params, inputs)
    return _ensemble_summary(outputs, arch.task, lik.noise_variance)

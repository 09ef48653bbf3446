"""Model-combination rules: predictive-space Gaussian and categorical products
with a prior correction, FedAvg parameter averaging, and the model-space
diagonal-Gaussian product used by the EP MCMC baseline."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .nn import Architecture, ModelParams
from .posterior import ClassificationSummary, RegressionSummary
from .sampler import PosteriorSamples


class SignConvention(str, Enum):
    # DERIVED_MINUS subtracts the prior term from both the precision and the
    # precision-weighted mean, which is what dividing by the prior predictive
    # density yields; PAPER_PLUS adds it to the mean term instead. The two
    # coincide for a zero prior mean.
    DERIVED_MINUS = "derived_minus"
    PAPER_PLUS = "paper_plus"


@dataclass(frozen=True)
class AggregationConfig:
    sign_convention: SignConvention = SignConvention.DERIVED_MINUS
    precision_floor: float = 1e-6
    prob_floor: float = 1e-6

    def __post_init__(self) -> None:
        object.__setattr__(self, "sign_convention", SignConvention(self.sign_convention))
        if self.precision_floor <= 0:
            raise ValueError("precision_floor must be positive")
        if not 0.0 < self.prob_floor < 0.5:
            raise ValueError("prob_floor must lie in (0, 0.5)")


@dataclass
class AggregationEvents:
    """Counters for numerical guard activations, surfaced in run metadata."""

    precision_clamps: int = 0
    prob_floors: int = 0

    def merge(self, other: "AggregationEvents") -> None:
        self.precision_clamps += other.precision_clamps
        self.prob_floors += other.prob_floors


@dataclass(frozen=True)
class DiagGaussianModelPosterior:
    """Axis-aligned Gaussian fit to one client's parameter samples."""

    mean: np.ndarray
    var: np.ndarray
    arch: Architecture

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        var = np.asarray(self.var, dtype=np.float64).ravel()
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)
        p = self.arch.parameter_count
        if mean.shape[0] != p or var.shape[0] != p:
            raise ValueError("mean/var length must equal the architecture parameter count")
        if not np.all(var > 0.0):
            raise ValueError("variances must be strictly positive")


def aggregate_regression(
    locals_: Sequence[RegressionSummary],
    prior: RegressionSummary,
    cfg: AggregationConfig,
    events: AggregationEvents | None = None,
) -> RegressionSummary:
    """Precision-weighted product of client Gaussians divided by the prior.

    Per output dimension: precision = sum_i 1/var_i - (n-1)/var_p, clamped
    below at the configured floor; the combined mean is the matching
    precision-weighted combination of client means and the prior mean.
    """
    if not locals_:
        raise ValueError("need at least one client summary")
    n = len(locals_)
    if n == 1:
        # The (n-1) prior terms vanish; the product is the lone client.
        return locals_[0]
    means = np.stack([s.mean for s in locals_], axis=0)
    precisions = np.stack([1.0 / s.var for s in locals_], axis=0)
    if prior.mean.shape != locals_[0].mean.shape:
        raise ValueError("prior summary shape must match the client summaries")
    prior_precision = 1.0 / prior.var

    total_precision = precisions.sum(axis=0) - (n - 1) * prior_precision
    clamped = total_precision < cfg.precision_floor
    if events is not None:
        events.precision_clamps += int(clamped.sum())
    total_precision = np.maximum(total_precision, cfg.precision_floor)

    weighted = (precisions * means).sum(axis=0)
    prior_term = (n - 1) * prior_precision * prior.mean
    if cfg.sign_convention is SignConvention.DERIVED_MINUS:
        weighted = weighted - prior_term
    else:
        weighted = weighted + prior_term
    return RegressionSummary(weighted / total_precision, 1.0 / total_precision)


def precision_weights(locals_: Sequence[RegressionSummary]) -> np.ndarray:
    """Normalized inverse-variance weights r_i, shape (n, b) for scalar outputs.

    With an uninformative prior the aggregated mean equals sum_i r_i * mu_i.
    """
    if not locals_:
        raise ValueError("need at least one client summary")
    if any(s.mean.shape[1] != 1 for s in locals_):
        raise ValueError("precision weights are defined for scalar-output summaries")
    precisions = np.stack([1.0 / s.var[:, 0] for s in locals_], axis=0)
    return precisions / precisions.sum(axis=0, keepdims=True)


def aggregate_classification(
    locals_: Sequence[ClassificationSummary],
    prior: ClassificationSummary,
    cfg: AggregationConfig,
    events: AggregationEvents | None = None,
) -> ClassificationSummary:
    """Log-space product of client class probabilities divided by the prior.

    Scores s_j = sum_i log p_i(j) - (n-1) log p_prior(j) are exponentiated
    with max-subtraction and renormalized over classes. Probabilities are
    floored before the log so one-hot clients stay finite.
    """
    if not locals_:
        raise ValueError("need at least one client summary")
    n = len(locals_)
    if n == 1:
        return locals_[0]
    k = locals_[0].probs.shape[1]
    if not 0.0 < cfg.prob_floor < 1.0 / k:
        raise ValueError(f"prob_floor must lie in (0, 1/{k}) for {k} classes")
    stacked = np.stack([s.probs for s in locals_], axis=0)
    if prior.probs.shape != locals_[0].probs.shape:
        raise ValueError("prior summary shape must match the client summaries")
    floored = stacked < cfg.prob_floor
    prior_floored = prior.probs < cfg.prob_floor
    if events is not None:
        events.prob_floors += int(floored.sum()) + int(prior_floored.sum())
    scores = np.log(np.maximum(stacked, cfg.prob_floor)).sum(axis=0)
    scores -= (n - 1) * np.log(np.maximum(prior.probs, cfg.prob_floor))
    scores -= scores.max(axis=1, keepdims=True)
    unnorm = np.exp(scores)
    return ClassificationSummary(unnorm / unnorm.sum(axis=1, keepdims=True))


def fedavg_params(params: Sequence[ModelParams], counts: Sequence[int]) -> ModelParams:
    """Dataset-size-weighted coordinate mean of parameter vectors.

    Inputs are summed in a canonical byte-order of the vectors, so the result
    is bitwise invariant to client ordering.
    """
    if len(params) != len(counts) or not params:
        raise ValueError("params and counts must be equal-length and nonempty")
    arch = params[0].arch
    if any(p.arch != arch for p in params):
        raise ValueError("all parameter vectors must share one architecture")
    if any(c <= 0 for c in counts):
        raise ValueError("counts must be positive")
    order = sorted(range(len(params)), key=lambda i: params[i].values.tobytes())
    total = float(sum(counts))
    acc = np.zeros_like(params[0].values)
    for i in order:
        acc += (counts[i] / total) * params[i].values
    return ModelParams(acc, arch)


def fit_diag_gaussian(samples: PosteriorSamples, var_floor: float = 1e-8) -> DiagGaussianModelPosterior:
    """Per-coordinate sample mean and unbiased variance, floored for stability."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to fit a Gaussian")
    mean = samples.samples.mean(axis=0)
    var = np.maximum(samples.samples.var(axis=0, ddof=1), var_floor)
    return DiagGaussianModelPosterior(mean, var, samples.arch)


def ep_mcmc_aggregate(
    locals_: Sequence[DiagGaussianModelPosterior],
    prior_variance: float,
    cfg: AggregationConfig,
    n_samples: int,
    seed: int,
    events: AggregationEvents | None = None,
    client_id: int = 0,
    dataset_size: int = 1,
) -> PosteriorSamples:
    """Multiply diagonal Gaussian model posteriors with a prior correction and
    draw fresh parameter samples from the product."""
    if not locals_:
        raise ValueError("need at least one local posterior")
    n = len(locals_)
    arch = locals_[0].arch
    if any(g.arch != arch for g in locals_):
        raise ValueError("all local posteriors must share one architecture")
    precisions = np.stack([1.0 / g.var for g in locals_], axis=0)
    total_precision = precisions.sum(axis=0) - (n - 1) / prior_variance
    clamped = total_precision < cfg.precision_floor
    if events is not None:
        events.precision_clamps += int(clamped.sum())
    total_precision = np.maximum(total_precision, cfg.precision_floor)
    mean = np.stack([g.mean / g.var for g in locals_], axis=0).sum(axis=0) / total_precision
    std = np.sqrt(1.0 / total_precision)
    rng = np.random.default_rng(seed)
    draws = mean + std * rng.standard_normal(size=(n_samples, arch.parameter_count))
    return PosteriorSamples(client_id, arch, dataset_size, draws)

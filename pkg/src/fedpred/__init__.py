"""fedpred: one-round Bayesian federated learning simulator.

Per-client Bayesian neural networks are trained with cyclical SGHMC, posterior
samples are exchanged in a single communication round, and client predictive
posteriors are aggregated into a global predictive posterior. FedAvg and a
model-space Gaussian-product baseline (EP MCMC) are included, along with a
heterogeneity-controlled evaluation harness.
"""

__version__ = "0.1.0"

from .aggregation import (
    AggregationConfig,
    AggregationEvents,
    DiagGaussianModelPosterior,
    SignConvention,
    aggregate_classification,
    aggregate_regression,
    ep_mcmc_aggregate,
    fedavg_params,
    fit_diag_gaussian,
    precision_weights,
)
from .data import (
    ClassificationKind,
    CsvSchema,
    Dataset,
    NormalizerStats,
    PartitionSpec,
    RegressionKind,
    apply_normalizer,
    fit_normalizer,
    load_csv,
    load_idx,
    partition,
    partition_indices,
    synth_classification,
    synth_regression,
    train_test_split,
)
from .federation import (
    CommLedger,
    GlobalEnsemble,
    deserialize_samples,
    load_ensemble,
    message_size,
    mix_seed,
    run_ep_mcmc,
    run_fedavg,
    run_predictive_bayes,
    save_ensemble,
    serialize_samples,
)
from .nn import (
    Activation,
    Architecture,
    Batch,
    InitMode,
    LikelihoodSpec,
    ModelParams,
    Task,
    forward,
    init_params,
    neg_log_posterior,
    neg_log_posterior_grad,
    softmax,
)
from .posterior import (
    ClassificationSummary,
    PredictiveSummary,
    PriorMode,
    PriorPredictiveConfig,
    RegressionSummary,
    predict_ensemble,
    prior_predictive,
)
from .sampler import (
    CsghmcConfig,
    PosteriorSamples,
    SgdConfig,
    csghmc_chain,
    csghmc_sample,
    cyclical_step_size,
    sgd_train,
    snapshot_steps,
)

__all__ = [name for name in dir() if not name.startswith("_")]

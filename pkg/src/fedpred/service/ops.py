"""Service operations shared by the HTTP endpoints and the CLI's local mode.

Every function takes a request model and returns a response model; FastAPI
endpoints and the CLI are thin wrappers on top.
"""

from __future__ import annotations

import numpy as np

from .. import __version__, experiment, federation
from ..aggregation import (
    AggregationConfig,
    AggregationEvents,
    aggregate_classification,
    aggregate_regression,
)
from ..config import parse_config_text
from ..data import PartitionSpec, label_histogram, partition
from ..nn import Task
from ..posterior import ClassificationSummary, RegressionSummary
from . import schemas


def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


def _result_model(r: experiment.RunResult) -> schemas.RunResultModel:
    return schemas.RunResultModel(**r.to_dict())


def _summary_models(rows) -> list[schemas.SummaryRowModel]:
    return [
        schemas.SummaryRowModel(
            method=r.method, heterogeneity=r.heterogeneity, metric=r.metric,
            mean=r.mean, std=r.std, n_seeds=r.n_seeds,
        )
        for r in rows
    ]


def run_experiment(req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
    cfg = parse_config_text(req.config_text)
    out_dir = req.output_dir if req.output_dir is not None else cfg.output_dir
    outcome = experiment.run_experiment(cfg, out_dir)
    return schemas.ExperimentResponse(
        results=[_result_model(r) for r in outcome.results],
        failures=[
            schemas.CellFailureModel(
                method=f.method, seed=f.seed, heterogeneity=f.heterogeneity, error=f.error
            )
            for f in outcome.failures
        ],
        summary=_summary_models(experiment.summarize(outcome.results)),
        output_dir=str(out_dir),
    )


def inspect_partition(req: schemas.PartitionInspectRequest) -> schemas.PartitionInspectResponse:
    """Partition the configured dataset at each heterogeneity level.

    Operates on the full dataset (no train/test split): this is a diagnostic
    of the partitioner itself, not of one experiment cell.
    """
    cfg = parse_config_text(req.config_text)
    seed = req.seed if req.seed is not None else cfg.seeds[0]
    ds, _ = cfg.build_dataset(seed)
    levels = []
    for h in cfg.heterogeneity:
        parts = partition(ds, PartitionSpec(cfg.n_clients, h, seed))
        clients = []
        for cid, shard in enumerate(parts):
            counts = None
            if shard.task is Task.CLASSIFICATION:
                counts = [int(c) for c in label_histogram(shard)]
            clients.append(
                schemas.ClientHistogram(client_id=cid, size=shard.n, class_counts=counts)
            )
        levels.append(schemas.PartitionLevel(heterogeneity=h, clients=clients))
    return schemas.PartitionInspectResponse(task=cfg.task.value, n_items=ds.n, levels=levels)


def aggregate_regression_op(
    req: schemas.RegressionAggregateRequest,
) -> schemas.RegressionAggregateResponse:
    cfg = AggregationConfig(
        sign_convention=req.sign_convention, precision_floor=req.precision_floor
    )
    events = AggregationEvents()
    locals_ = [
        RegressionSummary(np.asarray(m)[None, :], np.asarray(v)[None, :])
        for m, v in zip(req.means, req.variances, strict=True)
    ]
    prior = RegressionSummary(
        np.asarray(req.prior_mean)[None, :], np.asarray(req.prior_variance)[None, :]
    )
    combined = aggregate_regression(locals_, prior, cfg, events)
    return schemas.RegressionAggregateResponse(
        mean=combined.mean[0].tolist(),
        variance=combined.var[0].tolist(),
        precision_clamps=events.precision_clamps,
    )


def aggregate_classification_op(
    req: schemas.ClassificationAggregateRequest,
) -> schemas.ClassificationAggregateResponse:
    cfg = AggregationConfig(prob_floor=req.prob_floor)
    events = AggregationEvents()
    locals_ = [ClassificationSummary(np.asarray(p)[None, :]) for p in req.client_probs]
    k = locals_[0].probs.shape[1]
    prior_probs = req.prior_probs if req.prior_probs is not None else [1.0 / k] * k
    prior = ClassificationSummary(np.asarray(prior_probs)[None, :])
    combined = aggregate_classification(locals_, prior, cfg, events)
    return schemas.ClassificationAggregateResponse(
        probs=combined.probs[0].tolist(), prob_floors=events.prob_floors
    )


def evaluate(req: schemas.EvalRequest) -> schemas.EvalResponse:
    cfg = parse_config_text(req.config_text)
    ensemble, _ = federation.load_ensemble(req.ensemble_dir)
    metrics = experiment.evaluate_saved_ensemble(req.ensemble_dir, cfg)
    return schemas.EvalResponse(method=ensemble.method, metrics=metrics)


def compare(req: schemas.CompareRequest) -> schemas.CompareResponse:
    results = experiment.load_results(req.results_dir)
    rows = experiment.summarize(results)
    metric = "accuracy" if any(r.metric == "accuracy" for r in rows) else "mse"
    return schemas.CompareResponse(
        summary=_summary_models(rows),
        summary_csv=experiment.summary_csv(rows),
        curves_csv=experiment.curves_csv(rows, metric),
        metric=metric,
    )

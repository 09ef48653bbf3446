"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str


class RunResultModel(BaseModel):
    method: str
    seed: int
    heterogeneity: float
    metrics: dict[str, float]
    rounds: int
    uplink_bytes: int
    downlink_bytes: int
    precision_clamps: int = 0
    prob_floors: int = 0
    wall_seconds: float = 0.0


class CellFailureModel(BaseModel):
    method: str
    seed: int
    heterogeneity: float
    error: str


class SummaryRowModel(BaseModel):
    method: str
    heterogeneity: float
    metric: str
    mean: float
    std: float
    n_seeds: int


class ExperimentRequest(BaseModel):
    config_text: str = Field(description="experiment config in the flat key=value format")
    output_dir: str | None = Field(
        default=None, description="override the config's output_dir"
    )


class ExperimentResponse(BaseModel):
    results: list[RunResultModel]
    failures: list[CellFailureModel]
    summary: list[SummaryRowModel]
    output_dir: str


class JobSubmitResponse(BaseModel):
    job_id: str


class JobStatusResponse(BaseModel):
    job_id: str
    state: Literal["pending", "running", "done", "failed"]
    result: ExperimentResponse | None = None
    error: str | None = None


class PartitionInspectRequest(BaseModel):
    config_text: str
    seed: int | None = Field(default=None, description="defaults to the config's first seed")


class ClientHistogram(BaseModel):
    client_id: int
    size: int
    class_counts: list[int] | None = None


class PartitionLevel(BaseModel):
    heterogeneity: float
    clients: list[ClientHistogram]


class PartitionInspectResponse(BaseModel):
    task: str
    n_items: int
    levels: list[PartitionLevel]


class RegressionAggregateRequest(BaseModel):
    means: list[list[float]] = Field(description="per-client predictive means, n x out_dim")
    variances: list[list[float]] = Field(description="per-client predictive variances, n x out_dim")
    prior_mean: list[float]
    prior_variance: list[float]
    sign_convention: Literal["derived_minus", "paper_plus"] = "derived_minus"
    precision_floor: float = 1e-6


class RegressionAggregateResponse(BaseModel):
    mean: list[float]
    variance: list[float]
    precision_clamps: int


class ClassificationAggregateRequest(BaseModel):
    client_probs: list[list[float]] = Field(description="per-client class probabilities, n x K")
    prior_probs: list[float] | None = Field(
        default=None, description="prior class probabilities; defaults to uniform"
    )
    prob_floor: float = 1e-6


class ClassificationAggregateResponse(BaseModel):
    probs: list[float]
    prob_floors: int


class EvalRequest(BaseModel):
    ensemble_dir: str
    config_text: str = Field(description="config describing the dataset to score against")


class EvalResponse(BaseModel):
    method: str
    metrics: dict[str, float]


class CompareRequest(BaseModel):
    results_dir: str


class CompareResponse(BaseModel):
    summary: list[SummaryRowModel]
    summary_csv: str
    curves_csv: str
    metric: str

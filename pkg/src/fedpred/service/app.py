"""FastAPI application wrapping the experiment harness and aggregation core."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import FedpredError
from . import ops, schemas
from .jobs import JobStore


def create_app() -> FastAPI:
    app = FastAPI(
        title="fedpred",
        version=__version__,
        description=(
            "One-round Bayesian federated learning simulator: run experiments, "
            "inspect partitions, aggregate predictive posteriors, and score "
            "saved ensembles."
        ),
    )
    jobs = JobStore()

    def _wrap(fn, *args):
        try:
            return fn(*args)
        except FedpredError as err:
            raise HTTPException(status_code=422, detail=str(err)) from err
        except FileNotFoundError as err:
            raise HTTPException(status_code=404, detail=str(err)) from err

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return ops.health()

    @app.post("/experiments/run", response_model=schemas.ExperimentResponse)
    def run_experiment(req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
        return _wrap(ops.run_experiment, req)

    @app.post("/experiments/jobs", response_model=schemas.JobSubmitResponse)
    def submit_job(req: schemas.ExperimentRequest) -> schemas.JobSubmitResponse:
        # Validate the config up front so bad requests fail fast, not in the job.
        from ..config import parse_config_text

        _wrap(parse_config_text, req.config_text)
        job_id = jobs.submit(lambda: ops.run_experiment(req))
        return schemas.JobSubmitResponse(job_id=job_id)

    @app.get("/experiments/jobs/{job_id}", response_model=schemas.JobStatusResponse)
    def job_status(job_id: str) -> schemas.JobStatusResponse:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such job {job_id}")
        return schemas.JobStatusResponse(
            job_id=job.job_id,
            state=job.state,  # type: ignore[arg-type]
            result=job.result if job.state == "done" else None,
            error=job.error,
        )

    @app.post("/partitions/inspect", response_model=schemas.PartitionInspectResponse)
    def inspect_partition(req: schemas.PartitionInspectRequest) -> schemas.PartitionInspectResponse:
        return _wrap(ops.inspect_partition, req)

    @app.post("/aggregate/regression", response_model=schemas.RegressionAggregateResponse)
    def aggregate_regression(
        req: schemas.RegressionAggregateRequest,
    ) -> schemas.RegressionAggregateResponse:
        try:
            return ops.aggregate_regression_op(req)
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err)) from err

    @app.post("/aggregate/classification", response_model=schemas.ClassificationAggregateResponse)
    def aggregate_classification(
        req: schemas.ClassificationAggregateRequest,
    ) -> schemas.ClassificationAggregateResponse:
        try:
            return ops.aggregate_classification_op(req)
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err)) from err

    @app.post("/ensembles/evaluate", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest) -> schemas.EvalResponse:
        return _wrap(ops.evaluate, req)

    @app.post("/results/compare", response_model=schemas.CompareResponse)
    def compare(req: schemas.CompareRequest) -> schemas.CompareResponse:
        return _wrap(ops.compare, req)

    return app


app = create_app()

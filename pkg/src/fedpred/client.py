"""Thin client for the fedpred service.

The CLI talks to the same operation surface either in process (LocalBackend,
no server required) or over HTTP (HttpBackend against a running `fedpred
serve` instance). Both return the service's pydantic response models.
"""

from __future__ import annotations

from typing import Protocol

import httpx

from .service import ops, schemas


class ServiceBackend(Protocol):
    def health(self) -> schemas.HealthResponse: ...

    def run_experiment(self, req: schemas.ExperimentRequest) -> schemas.ExperimentResponse: ...

    def inspect_partition(
        self, req: schemas.PartitionInspectRequest
    ) -> schemas.PartitionInspectResponse: ...

    def evaluate(self, req: schemas.EvalRequest) -> schemas.EvalResponse: ...

    def compare(self, req: schemas.CompareRequest) -> schemas.CompareResponse: ...


class LocalBackend:
    """Run service operations in process."""

    def health(self) -> schemas.HealthResponse:
        return ops.health()

    def run_experiment(self, req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
        return ops.run_experiment(req)

    def inspect_partition(
        self, req: schemas.PartitionInspectRequest
    ) -> schemas.PartitionInspectResponse:
        return ops.inspect_partition(req)

    def evaluate(self, req: schemas.EvalRequest) -> schemas.EvalResponse:
        return ops.evaluate(req)

    def compare(self, req: schemas.CompareRequest) -> schemas.CompareResponse:
        return ops.compare(req)


class HttpBackend:
    """Send service operations to a remote fedpred server."""

    def __init__(self, base_url: str, timeout: float = 3600.0) -> None:
        self._client = httpx.Client(base_url=base_url, timeout=timeout)

    def _post(self, path: str, req, model):
        response = self._client.post(path, json=req.model_dump())
        if response.status_code >= 400:
            detail = response.json().get("detail", response.text)
            raise RuntimeError(f"server rejected {path}: {detail}")
        return model.model_validate(response.json())

    def health(self) -> schemas.HealthResponse:
        response = self._client.get("/health")
        response.raise_for_status()
        return schemas.HealthResponse.model_validate(response.json())

    def run_experiment(self, req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
        return self._post("/experiments/run", req, schemas.ExperimentResponse)

    def inspect_partition(
        self, req: schemas.PartitionInspectRequest
    ) -> schemas.PartitionInspectResponse:
        return self._post("/partitions/inspect", req, schemas.PartitionInspectResponse)

    def evaluate(self, req: schemas.EvalRequest) -> schemas.EvalResponse:
        return self._post("/ensembles/evaluate", req, schemas.EvalResponse)

    def compare(self, req: schemas.CompareRequest) -> schemas.CompareResponse:
        return self._post("/results/compare", req, schemas.CompareResponse)


def make_backend(server: str | None) -> ServiceBackend:
    return HttpBackend(server) if server else LocalBackend()

"""Configuration-driven experiment harness: partition, train, evaluate, and
emit machine-readable results (CSV plus a JSON-lines mirror)."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import federation
from .config import ExperimentConfig
from .data import (
    Dataset,
    NormalizerStats,
    PartitionSpec,
    apply_normalizer,
    fit_normalizer,
    partition,
    train_test_split,
)
from .errors import FedpredError
from .federation import CommLedger, GlobalEnsemble
from .metrics import (
    metric_accuracy,
    metric_ece,
    metric_mse,
    metric_nll_classification,
    metric_nll_regression,
)
from .nn import Task
from .posterior import ClassificationSummary, RegressionSummary

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "method",
    "seed",
    "heterogeneity",
    "accuracy",
    "mse",
    "nll",
    "ece",
    "rounds",
    "uplink_bytes",
    "downlink_bytes",
    "precision_clamps",
    "prob_floors",
    "wall_seconds",
)

CLASSIFICATION_METRICS = ("accuracy", "nll", "ece")
REGRESSION_METRICS = ("mse", "nll")


@dataclass(frozen=True)
class RunResult:
    """Metrics and accounting for one (method, seed, heterogeneity) cell."""

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

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "seed": self.seed,
            "heterogeneity": self.heterogeneity,
            "metrics": dict(self.metrics),
            "rounds": self.rounds,
            "uplink_bytes": self.uplink_bytes,
            "downlink_bytes": self.downlink_bytes,
            "precision_clamps": self.precision_clamps,
            "prob_floors": self.prob_floors,
            "wall_seconds": self.wall_seconds,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "RunResult":
        return RunResult(
            method=d["method"],
            seed=int(d["seed"]),
            heterogeneity=float(d["heterogeneity"]),
            metrics={k: float(v) for k, v in d["metrics"].items()},
            rounds=int(d["rounds"]),
            uplink_bytes=int(d["uplink_bytes"]),
            downlink_bytes=int(d["downlink_bytes"]),
            precision_clamps=int(d.get("precision_clamps", 0)),
            prob_floors=int(d.get("prob_floors", 0)),
            wall_seconds=float(d.get("wall_seconds", 0.0)),
        )

    def csv_row(self) -> list[str]:
        row = [self.method, repr(self.seed), repr(self.heterogeneity)]
        for name in ("accuracy", "mse", "nll", "ece"):
            row.append(repr(self.metrics[name]) if name in self.metrics else "")
        row += [
            repr(self.rounds),
            repr(self.uplink_bytes),
            repr(self.downlink_bytes),
            repr(self.precision_clamps),
            repr(self.prob_floors),
            repr(self.wall_seconds),
        ]
        return row


@dataclass(frozen=True)
class CellFailure:
    method: str
    seed: int
    heterogeneity: float
    error: str


@dataclass
class ExperimentOutcome:
    results: list[RunResult] = field(default_factory=list)
    failures: list[CellFailure] = field(default_factory=list)


def evaluate_ensemble(ensemble: GlobalEnsemble, test: Dataset) -> dict[str, float]:
    """Score an ensemble on a held-out set; metric set depends on the task."""
    summary = ensemble.predict(test.features)
    if test.task is Task.CLASSIFICATION:
        assert isinstance(summary, ClassificationSummary)
        probs = summary.probs
        return {
            "accuracy": metric_accuracy(probs, test.targets),
            "nll": metric_nll_classification(probs, test.targets, ensemble.agg_cfg.prob_floor),
            "ece": metric_ece(probs, test.targets),
        }
    assert isinstance(summary, RegressionSummary)
    return {
        "mse": metric_mse(summary.mean, test.targets),
        "nll": metric_nll_regression(summary.mean, summary.var, test.targets),
    }


def _run_method(
    cfg: ExperimentConfig,
    method: str,
    parts: Sequence[Dataset],
    arch,
    seed: int,
) -> tuple[GlobalEnsemble, CommLedger]:
    lik = cfg.likelihood()
    if method == federation.METHOD_PREDICTIVE_BAYES:
        return federation.run_predictive_bayes(
            parts, arch, lik, cfg.csghmc_config(), cfg.aggregation_config(),
            cfg.prior_config(arch.output_dim), seed,
        )
    if method == federation.METHOD_EP_MCMC:
        return federation.run_ep_mcmc(
            parts, arch, lik, cfg.csghmc_config(), cfg.aggregation_config(),
            cfg["ep_mcmc.samples"], seed,
        )
    rounds = cfg["fedavg.rounds"] if method == federation.METHOD_FEDAVG else 1
    return federation.run_fedavg(parts, arch, lik, cfg.sgd_config(), rounds, seed)


def _prepare_cell_data(
    cfg: ExperimentConfig, seed: int
) -> tuple[Dataset, Dataset, NormalizerStats]:
    """Build, split, and normalize the dataset for one seed."""
    base, explicit_test = cfg.build_dataset(seed)
    if explicit_test is None:
        train, test = train_test_split(base, cfg.test_fraction, seed)
    else:
        train, test = base, explicit_test
    stats = fit_normalizer(train)
    return apply_normalizer(stats, train), apply_normalizer(stats, test), stats


def run_cell(
    cfg: ExperimentConfig, method: str, seed: int, heterogeneity: float
) -> tuple[RunResult, GlobalEnsemble, NormalizerStats]:
    """Run one experiment cell end to end and score it on the test split."""
    t0 = time.perf_counter()
    train, test, stats = _prepare_cell_data(cfg, seed)
    parts = partition(train, PartitionSpec(cfg.n_clients, heterogeneity, seed))
    arch = cfg.architecture(train.input_dim, train.output_dim)
    ensemble, ledger = _run_method(cfg, method, parts, arch, seed)
    metrics = evaluate_ensemble(ensemble, test)
    result = RunResult(
        method=method,
        seed=seed,
        heterogeneity=heterogeneity,
        metrics=metrics,
        rounds=ledger.rounds,
        uplink_bytes=ledger.total_uplink,
        downlink_bytes=ledger.total_downlink,
        precision_clamps=ensemble.events.precision_clamps,
        prob_floors=ensemble.events.prob_floors,
        wall_seconds=time.perf_counter() - t0,
    )
    return result, ensemble, stats


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None) -> ExperimentOutcome:
    """Cartesian product over (seed, heterogeneity, method).

    Results are appended to results.csv and results.jsonl in the output
    directory as cells finish; a summary table lands in summary.csv at the
    end. Cell failures are recorded and skipped.
    """
    out_dir = Path(output_dir if output_dir is not None else cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    jsonl_path = out_dir / "results.jsonl"
    csv_path.write_text(",".join(CSV_COLUMNS) + "\n")
    jsonl_path.write_text("")

    outcome = ExperimentOutcome()
    for seed in cfg.seeds:
        for h in cfg.heterogeneity:
            for method in cfg.methods:
                try:
                    result, ensemble, stats = run_cell(cfg, method, seed, h)
                except FedpredError as err:
                    logger.error("cell (%s, seed=%d, h=%.2f) failed: %s", method, seed, h, err)
                    outcome.failures.append(CellFailure(method, seed, h, str(err)))
                    with jsonl_path.open("a") as fh:
                        fh.write(json.dumps({
                            "failed": True, "method": method, "seed": seed,
                            "heterogeneity": h, "error": str(err),
                        }) + "\n")
                    continue
                outcome.results.append(result)
                with csv_path.open("a", newline="") as fh:
                    csv.writer(fh).writerow(result.csv_row())
                with jsonl_path.open("a") as fh:
                    fh.write(json.dumps(result.to_dict()) + "\n")
                if cfg.save_ensembles:
                    ens_dir = out_dir / "ensembles" / f"{method}_seed{seed}_h{h:g}"
                    federation.save_ensemble(
                        ensemble, ens_dir, provenance=_provenance(cfg, seed, h, stats, result)
                    )
                logger.info(
                    "cell (%s, seed=%d, h=%.2f): %s", method, seed, h,
                    {k: round(v, 4) for k, v in result.metrics.items()},
                )
    summary = summarize(outcome.results)
    (out_dir / "summary.csv").write_text(summary_csv(summary))
    return outcome


def _provenance(
    cfg: ExperimentConfig, seed: int, h: float, stats: NormalizerStats, result: RunResult
) -> dict[str, Any]:
    return {
        "config": cfg.echo(),
        "seed": seed,
        "heterogeneity": h,
        "normalizer": {
            "feature_mean": stats.feature_mean.tolist(),
            "feature_std": stats.feature_std.tolist(),
            "target_mean": None if stats.target_mean is None else stats.target_mean.tolist(),
            "target_std": None if stats.target_std is None else stats.target_std.tolist(),
        },
        "metrics": dict(result.metrics),
    }


@dataclass(frozen=True)
class SummaryRow:
    method: str
    heterogeneity: float
    metric: str
    mean: float
    std: float
    n_seeds: int


def summarize(results: Sequence[RunResult]) -> list[SummaryRow]:
    """Mean and sample standard deviation over seeds, per cell and metric."""
    cells: dict[tuple[str, float], list[RunResult]] = {}
    for r in results:
        cells.setdefault((r.method, r.heterogeneity), []).append(r)
    rows: list[SummaryRow] = []
    for (method, h) in sorted(cells):
        group = cells[(method, h)]
        metric_names = sorted({name for r in group for name in r.metrics})
        for name in metric_names:
            vals = np.asarray([r.metrics[name] for r in group if name in r.metrics])
            std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            rows.append(SummaryRow(method, h, name, float(vals.mean()), std, len(vals)))
    return rows


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["method", "heterogeneity", "metric", "mean", "std", "n_seeds"])
    for row in rows:
        writer.writerow([
            row.method, repr(row.heterogeneity), row.metric,
            repr(row.mean), repr(row.std), row.n_seeds,
        ])
    return buf.getvalue()


def curves_csv(rows: Sequence[SummaryRow], metric: str) -> str:
    """Per-heterogeneity mean-metric curves, one column per method."""
    methods = sorted({r.method for r in rows if r.metric == metric})
    hs = sorted({r.heterogeneity for r in rows if r.metric == metric})
    by_key = {(r.method, r.heterogeneity): r.mean for r in rows if r.metric == metric}
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["heterogeneity", *methods])
    for h in hs:
        writer.writerow([repr(h)] + [
            repr(by_key[(m, h)]) if (m, h) in by_key else "" for m in methods
        ])
    return buf.getvalue()


def load_results(results_dir: str | Path) -> list[RunResult]:
    """Read the JSON-lines mirror back into RunResults (failures skipped)."""
    path = Path(results_dir) / "results.jsonl"
    if not path.is_file():
        raise FileNotFoundError(f"no results.jsonl under {results_dir}")
    results = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        if d.get("failed"):
            continue
        results.append(RunResult.from_dict(d))
    return results


def parse_results_csv(text: str) -> list[RunResult]:
    """Inverse of the results.csv writer; round-trips values exactly."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected results.csv header: {header}")
    out = []
    for row in reader:
        rec = dict(zip(CSV_COLUMNS, row))
        metrics = {
            name: float(rec[name])
            for name in ("accuracy", "mse", "nll", "ece")
            if rec[name] != ""
        }
        out.append(RunResult(
            method=rec["method"],
            seed=int(rec["seed"]),
            heterogeneity=float(rec["heterogeneity"]),
            metrics=metrics,
            rounds=int(rec["rounds"]),
            uplink_bytes=int(rec["uplink_bytes"]),
            downlink_bytes=int(rec["downlink_bytes"]),
            precision_clamps=int(rec["precision_clamps"]),
            prob_floors=int(rec["prob_floors"]),
            wall_seconds=float(rec["wall_seconds"]),
        ))
    return out


def evaluate_saved_ensemble(
    ensemble_dir: str | Path, data_cfg: ExperimentConfig
) -> dict[str, float]:
    """Score a saved ensemble on the test split implied by its provenance.

    The dataset comes from `data_cfg`; the split seed, test fraction, and
    normalizer statistics come from the stored manifest, so evaluating against
    the training config reproduces the training run's test metrics exactly.
    """
    ensemble, provenance = federation.load_ensemble(ensemble_dir)
    seed = int(provenance["seed"])
    stored = provenance["config"]
    base, explicit_test = data_cfg.build_dataset(seed)
    if explicit_test is None:
        _, test = train_test_split(base, float(stored["test_fraction"]), seed)
    else:
        test = explicit_test
    norm = provenance["normalizer"]
    stats = NormalizerStats(
        np.asarray(norm["feature_mean"]),
        np.asarray(norm["feature_std"]),
        None if norm["target_mean"] is None else np.asarray(norm["target_mean"]),
        None if norm["target_std"] is None else np.asarray(norm["target_std"]),
    )
    return evaluate_ensemble(ensemble, apply_normalizer(stats, test))

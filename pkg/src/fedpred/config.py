"""Flat key=value experiment configuration.

One `key = value` pair per line, `#` lines are comments, unknown keys are hard
errors. Lists are comma-separated. The full key table lives in the README.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import federation
from .aggregation import AggregationConfig, SignConvention
from .data import (
    ClassificationKind,
    CsvSchema,
    Dataset,
    RegressionKind,
    load_csv,
    load_idx,
    synth_classification,
    synth_regression,
)
from .errors import ConfigError
from .nn import Architecture, LikelihoodSpec, Task
from .posterior import PriorMode, PriorPredictiveConfig
from .sampler import CsghmcConfig, SgdConfig

SYNTHETIC_KINDS = ("blobs", "sine", "linear")
DATASET_KINDS = SYNTHETIC_KINDS + ("csv", "idx")


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in raw.split(",") if part.strip())


def _parse_float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in raw.split(",") if part.strip())


def _parse_str_list(raw: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in raw.split(",") if part.strip())


# key -> (parser, default); None default means the key must be set explicitly
# before anything uses it.
_KEY_TABLE: dict[str, tuple[Callable[[str], Any], Any]] = {
    "task": (str.strip, None),
    "dataset": (str.strip, None),
    "name": (str.strip, ""),
    "data.n": (int, 2000),
    "data.classes": (int, 10),
    "data.features": (int, 20),
    "data.separation": (float, 10.0),
    "data.noise_std": (float, 0.1),
    "data.path": (str.strip, None),
    "data.feature_cols": (_parse_int_list, None),
    "data.target_col": (int, None),
    "data.delimiter": (str, ","),
    "data.header": (_parse_bool, True),
    "data.images": (str.strip, None),
    "data.labels": (str.strip, None),
    "data.test_images": (str.strip, None),
    "data.test_labels": (str.strip, None),
    "test_fraction": (float, 0.2),
    "n_clients": (int, 5),
    "heterogeneity": (_parse_float_list, (0.0, 0.7, 0.9)),
    "methods": (_parse_str_list, (federation.METHOD_PREDICTIVE_BAYES, federation.METHOD_FEDAVG_1ROUND)),
    "seeds": (_parse_int_list, (0, 1, 2)),
    "arch.hidden": (_parse_int_list, (100, 100)),
    "likelihood.noise_variance": (float, 0.1),
    "likelihood.prior_variance": (float, 1.0),
    "sgd.learning_rate": (float, 0.01),
    "sgd.momentum": (float, 0.9),
    "sgd.epochs": (int, 25),
    "sgd.batch_size": (int, 64),
    "fedavg.rounds": (int, 5),
    "csghmc.cycles": (int, 5),
    "csghmc.epochs_per_cycle": (int, 5),
    "csghmc.initial_step": (float, 1e-4),
    "csghmc.exploration_fraction": (float, 0.8),
    "csghmc.friction": (float, 0.1),
    "csghmc.batch_size": (int, 64),
    "csghmc.samples_per_cycle": (int, 2),
    "ep_mcmc.samples": (int, 10),
    "prior.mode": (str.strip, "auto"),
    "prior.mean": (float, 0.0),
    "prior.variance": (float, 100.0),
    "prior.samples": (int, 32),
    "aggregation.sign": (str.strip, SignConvention.DERIVED_MINUS.value),
    "aggregation.precision_floor": (float, 1e-6),
    "aggregation.prob_floor": (float, 1e-6),
    "output_dir": (str.strip, "runs"),
    "save_ensembles": (_parse_bool, False),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment configuration; `values` holds every resolved key."""

    values: dict[str, Any]
    raw_lines: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def task(self) -> Task:
        return Task(self.values["task"])

    @property
    def dataset_kind(self) -> str:
        return self.values["dataset"]

    @property
    def methods(self) -> tuple[str, ...]:
        return self.values["methods"]

    @property
    def seeds(self) -> tuple[int, ...]:
        return self.values["seeds"]

    @property
    def heterogeneity(self) -> tuple[float, ...]:
        return self.values["heterogeneity"]

    @property
    def n_clients(self) -> int:
        return self.values["n_clients"]

    @property
    def test_fraction(self) -> float:
        return self.values["test_fraction"]

    @property
    def output_dir(self) -> str:
        return self.values["output_dir"]

    @property
    def save_ensembles(self) -> bool:
        return self.values["save_ensembles"]

    def likelihood(self) -> LikelihoodSpec:
        return LikelihoodSpec(
            noise_variance=self.values["likelihood.noise_variance"],
            prior_variance=self.values["likelihood.prior_variance"],
        )

    def sgd_config(self) -> SgdConfig:
        return SgdConfig(
            learning_rate=self.values["sgd.learning_rate"],
            momentum=self.values["sgd.momentum"],
            epochs=self.values["sgd.epochs"],
            batch_size=self.values["sgd.batch_size"],
        )

    def csghmc_config(self) -> CsghmcConfig:
        return CsghmcConfig(
            cycles=self.values["csghmc.cycles"],
            epochs_per_cycle=self.values["csghmc.epochs_per_cycle"],
            initial_step=self.values["csghmc.initial_step"],
            exploration_fraction=self.values["csghmc.exploration_fraction"],
            friction=self.values["csghmc.friction"],
            batch_size=self.values["csghmc.batch_size"],
            samples_per_cycle=self.values["csghmc.samples_per_cycle"],
        )

    def aggregation_config(self) -> AggregationConfig:
        return AggregationConfig(
            sign_convention=self.values["aggregation.sign"],
            precision_floor=self.values["aggregation.precision_floor"],
            prob_floor=self.values["aggregation.prob_floor"],
        )

    def prior_config(self, output_dim: int) -> PriorPredictiveConfig:
        mode = self.values["prior.mode"]
        if mode == "auto":
            mode = (
                PriorMode.UNIFORM_CLASSES.value
                if self.task is Task.CLASSIFICATION
                else PriorMode.FIXED_GAUSSIAN.value
            )
        if mode == PriorMode.FIXED_GAUSSIAN.value:
            return PriorPredictiveConfig(
                mode=mode,
                mean=np.full(output_dim, self.values["prior.mean"]),
                variance=np.full(output_dim, self.values["prior.variance"]),
                sample_count=self.values["prior.samples"],
            )
        return PriorPredictiveConfig(mode=mode, sample_count=self.values["prior.samples"])

    def architecture(self, input_dim: int, output_dim: int) -> Architecture:
        hidden = self.values["arch.hidden"]
        return Architecture((input_dim, *hidden, output_dim), self.task)

    def build_dataset(self, seed: int) -> tuple[Dataset, Dataset | None]:
        """Materialize the configured dataset; synthetic kinds are seeded.

        Returns (dataset, explicit_test) where explicit_test is non-None only
        for IDX pairs that name a separate test split.
        """
        kind = self.dataset_kind
        v = self.values
        if kind == "blobs":
            ds = synth_classification(
                ClassificationKind.GAUSSIAN_BLOBS,
                v["data.n"], v["data.classes"], v["data.features"], v["data.separation"], seed,
            )
            return ds, None
        if kind in ("sine", "linear"):
            ds = synth_regression(RegressionKind(kind), v["data.n"], v["data.noise_std"], seed)
            return ds, None
        if kind == "csv":
            schema = CsvSchema(
                feature_columns=v["data.feature_cols"],
                target_column=v["data.target_col"],
                task=self.task,
                has_header=v["data.header"],
                delimiter=v["data.delimiter"],
            )
            ds, _ = load_csv(v["data.path"], schema)
            return ds, None
        train = load_idx(v["data.images"], v["data.labels"])
        test = None
        if v["data.test_images"] is not None:
            test = load_idx(v["data.test_images"], v["data.test_labels"])
        return train, test

    def echo(self) -> dict[str, Any]:
        """JSON-serializable copy of every resolved key (for manifests)."""
        out = {}
        for key, value in self.values.items():
            out[key] = list(value) if isinstance(value, tuple) else value
        return out


def _validated(values: dict[str, Any]) -> None:
    def bad(key: str, why: str) -> ConfigError:
        return ConfigError(f"config key '{key}': {why}")

    if values["task"] not in (t.value for t in Task):
        raise bad("task", f"must be one of {[t.value for t in Task]}, got {values['task']!r}")
    kind = values["dataset"]
    if kind not in DATASET_KINDS:
        raise bad("dataset", f"must be one of {DATASET_KINDS}, got {kind!r}")
    task = Task(values["task"])
    if kind in ("sine", "linear") and task is not Task.REGRESSION:
        raise bad("dataset", f"'{kind}' is a regression generator")
    if kind in ("blobs", "idx") and task is not Task.CLASSIFICATION:
        raise bad("dataset", f"'{kind}' is a classification source")
    if kind == "csv":
        for key in ("data.path", "data.feature_cols", "data.target_col"):
            if values[key] is None:
                raise bad(key, "required for dataset = csv")
    if kind == "idx":
        for key in ("data.images", "data.labels"):
            if values[key] is None:
                raise bad(key, "required for dataset = idx")
        if (values["data.test_images"] is None) != (values["data.test_labels"] is None):
            raise bad("data.test_images", "test images and labels must be set together")
    if not values["methods"]:
        raise bad("methods", "must not be empty")
    for m in values["methods"]:
        if m not in federation.ALL_METHODS:
            raise bad("methods", f"unknown method {m!r}; valid: {federation.ALL_METHODS}")
    if not values["seeds"]:
        raise bad("seeds", "must not be empty")
    if not values["heterogeneity"]:
        raise bad("heterogeneity", "must not be empty")
    for h in values["heterogeneity"]:
        if not 0.0 <= h <= 1.0:
            raise bad("heterogeneity", f"values must lie in [0, 1], got {h}")
    if not 0.0 < values["test_fraction"] < 1.0:
        raise bad("test_fraction", "must lie strictly between 0 and 1")
    if values["n_clients"] < 1:
        raise bad("n_clients", "must be >= 1")
    if values["prior.mode"] not in ("auto", *(m.value for m in PriorMode)):
        raise bad("prior.mode", f"unknown mode {values['prior.mode']!r}")
    if values["aggregation.sign"] not in (s.value for s in SignConvention):
        raise bad("aggregation.sign", f"unknown sign convention {values['aggregation.sign']!r}")
    if values["fedavg.rounds"] < 1:
        raise bad("fedavg.rounds", "must be >= 1")
    if (
        federation.METHOD_FEDAVG in values["methods"]
        and values["sgd.epochs"] < values["fedavg.rounds"]
    ):
        raise bad("sgd.epochs", "epoch budget must cover fedavg.rounds")
    # Delegate numeric range checks to the typed configs so messages stay in
    # one place; surface them as ConfigError with the offending section.
    probe = ExperimentConfig(values)
    for section, build in (
        ("likelihood.*", probe.likelihood),
        ("sgd.*", probe.sgd_config),
        ("csghmc.*", probe.csghmc_config),
        ("aggregation.*", probe.aggregation_config),
    ):
        try:
            build()
        except ValueError as err:
            raise ConfigError(f"config section {section}: {err}") from err


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {key: default for key, (_, default) in _KEY_TABLE.items()}
    raw_lines: dict[str, str] = {}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source} line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw_value = stripped.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _KEY_TABLE:
            raise ConfigError(f"{source} line {lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"{source} line {lineno}: duplicate key '{key}'")
        seen.add(key)
        parser, _ = _KEY_TABLE[key]
        try:
            values[key] = parser(raw_value)
        except ValueError as err:
            raise ConfigError(
                f"{source} line {lineno}: bad value for '{key}': {err}"
            ) from err
        raw_lines[key] = raw_value
    missing = [k for k in ("task", "dataset") if values[k] is None]
    if missing:
        raise ConfigError(f"{source}: missing required key(s) {missing}")
    _validated(values)
    return ExperimentConfig(values, raw_lines)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))

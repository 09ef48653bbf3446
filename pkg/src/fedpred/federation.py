"""Client/server orchestration for each federated method, communication
accounting, and the binary wire format for the one-round sample exchange.

Clients are simulated in process behind a strict message boundary: the only
things that cross it are serialized parameter samples and dataset sizes,
never raw features or targets. Per-client randomness derives from the master
seed and the client id alone, so results do not depend on execution order.

Wire format (little-endian), one message per client upload:

    magic      "FPSB"                      4 bytes
    version    u16 = 1                     2 bytes
    layers     u16 layer count L           2 bytes
    sizes      u32 x L layer sizes         4L bytes
    activation u8 code (0 = relu)          1 byte
    task       u8 code (0 = regr, 1 = cls) 1 byte
    client_id  u32                         4 bytes
    dataset_sz u32                         4 bytes
    S          u32 sample count            4 bytes
    payload    S * P float64, sample-major 8SP bytes
    crc        u32 CRC-32 of the payload   4 bytes
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregation import (
    AggregationConfig,
    AggregationEvents,
    aggregate_classification,
    aggregate_regression,
    ep_mcmc_aggregate,
    fedavg_params,
    fit_diag_gaussian,
)
from .data import Dataset
from .errors import (
    BadMagicError,
    ChecksumMismatchError,
    DivergenceError,
    NonFinitePayloadError,
    TruncatedMessageError,
    VersionMismatchError,
)
from .nn import (
    Activation,
    Architecture,
    InitMode,
    LikelihoodSpec,
    ModelParams,
    Task,
    forward,
    init_params,
    softmax,
)
from .posterior import (
    ClassificationSummary,
    PredictiveSummary,
    PriorPredictiveConfig,
    RegressionSummary,
    predict_ensemble,
    prior_predictive,
)
from .sampler import CsghmcConfig, PosteriorSamples, SgdConfig, csghmc_sample, sgd_train

MAGIC = b"FPSB"
WIRE_VERSION = 1
_ACTIVATION_CODES = {Activation.RELU: 0}
_TASK_CODES = {Task.REGRESSION: 0, Task.CLASSIFICATION: 1}
_ACTIVATION_FROM_CODE = {v: k for k, v in _ACTIVATION_CODES.items()}
_TASK_FROM_CODE = {v: k for k, v in _TASK_CODES.items()}

# Stream ids for seed derivation; client streams are the client ids.
SERVER_STREAM = 0xFFFFFFFF
_MASK64 = (1 << 64) - 1

METHOD_PREDICTIVE_BAYES = "predictive_bayes"
METHOD_FEDAVG = "fedavg"
METHOD_FEDAVG_1ROUND = "fedavg_1round"
METHOD_EP_MCMC = "ep_mcmc"
ALL_METHODS = (
    METHOD_PREDICTIVE_BAYES,
    METHOD_FEDAVG,
    METHOD_FEDAVG_1ROUND,
    METHOD_EP_MCMC,
)


def mix_seed(master_seed: int, stream: int) -> int:
    """Derive an independent 64-bit seed from (master_seed, stream).

    splitmix64 applied to master + (stream + 1) * golden-ratio increment.
    """
    z = (master_seed + (stream + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def message_size(arch: Architecture, n_samples: int) -> int:
    """Exact byte length of a serialized sample message."""
    return 26 + 4 * len(arch.layer_sizes) + 8 * n_samples * arch.parameter_count


def serialize_samples(samples: PosteriorSamples) -> bytes:
    """Encode posterior samples for the wire; round-trips bitwise."""
    arch = samples.arch
    sizes = arch.layer_sizes
    header = struct.pack("<4sHH", MAGIC, WIRE_VERSION, len(sizes))
    header += struct.pack(f"<{len(sizes)}I", *sizes)
    header += struct.pack(
        "<BBIII",
        _ACTIVATION_CODES[arch.activation],
        _TASK_CODES[arch.task],
        samples.client_id,
        samples.dataset_size,
        len(samples),
    )
    payload = np.ascontiguousarray(samples.samples, dtype="<f8").tobytes()
    return header + payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def _take(buf: bytes, offset: int, count: int, what: str) -> tuple[bytes, int]:
    if len(buf) < offset + count:
        raise TruncatedMessageError(
            f"message ends inside {what}: need {offset + count} bytes, have {len(buf)}"
        )
    return buf[offset : offset + count], offset + count


def deserialize_samples(buf: bytes) -> PosteriorSamples:
    """Decode a sample message, validating magic, version, length, and CRC."""
    raw, off = _take(buf, 0, 8, "the fixed header")
    magic, version, n_layers = struct.unpack("<4sHH", raw)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != WIRE_VERSION:
        raise VersionMismatchError(f"unsupported wire version {version}")
    raw, off = _take(buf, off, 4 * n_layers, "the layer sizes")
    sizes = struct.unpack(f"<{n_layers}I", raw)
    raw, off = _take(buf, off, 14, "the sample header")
    act_code, task_code, client_id, dataset_size, n_samples = struct.unpack("<BBIII", raw)
    if act_code not in _ACTIVATION_FROM_CODE or task_code not in _TASK_FROM_CODE:
        raise VersionMismatchError(
            f"unknown activation/task codes ({act_code}, {task_code})"
        )
    arch = Architecture(sizes, _TASK_FROM_CODE[task_code], _ACTIVATION_FROM_CODE[act_code])
    payload_len = 8 * n_samples * arch.parameter_count
    payload, off = _take(buf, off, payload_len, "the sample payload")
    raw, off = _take(buf, off, 4, "the checksum")
    (crc,) = struct.unpack("<I", raw)
    if crc != zlib.crc32(payload) & 0xFFFFFFFF:
        raise ChecksumMismatchError("payload CRC-32 does not match")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(
        n_samples, arch.parameter_count
    )
    if not np.all(np.isfinite(values)):
        raise NonFinitePayloadError("decoded samples contain non-finite entries")
    return PosteriorSamples(client_id, arch, dataset_size, values)


@dataclass
class CommLedger:
    """Communication accounting: synchronization rounds and bytes moved."""

    rounds: int = 0
    uplink_bytes: dict[int, int] = field(default_factory=dict)
    downlink_bytes: dict[int, int] = field(default_factory=dict)

    def record_uplink(self, client_id: int, n_bytes: int) -> None:
        self.uplink_bytes[client_id] = self.uplink_bytes.get(client_id, 0) + n_bytes

    def record_downlink(self, client_id: int, n_bytes: int) -> None:
        self.downlink_bytes[client_id] = self.downlink_bytes.get(client_id, 0) + n_bytes

    @property
    def total_uplink(self) -> int:
        return sum(self.uplink_bytes.values())

    @property
    def total_downlink(self) -> int:
        return sum(self.downlink_bytes.values())


@dataclass
class GlobalEnsemble:
    """Server-side model state for one method, with a predict() entry point."""

    method: str
    arch: Architecture
    lik: LikelihoodSpec
    agg_cfg: AggregationConfig
    prior_cfg: PriorPredictiveConfig | None
    prior_seed: int = 0
    client_samples: list[PosteriorSamples] | None = None
    global_samples: PosteriorSamples | None = None
    params: ModelParams | None = None
    events: AggregationEvents = field(default_factory=AggregationEvents)

    def predict(self, inputs: np.ndarray) -> PredictiveSummary:
        if self.method == METHOD_PREDICTIVE_BAYES:
            assert self.client_samples is not None and self.prior_cfg is not None
            locals_ = [
                predict_ensemble(s, inputs, self.lik)
                for s in sorted(self.client_samples, key=lambda s: s.client_id)
            ]
            prior = prior_predictive(self.arch, self.lik, inputs, self.prior_cfg, self.prior_seed)
            if self.arch.task is Task.CLASSIFICATION:
                return aggregate_classification(locals_, prior, self.agg_cfg, self.events)
            return aggregate_regression(locals_, prior, self.agg_cfg, self.events)
        if self.method == METHOD_EP_MCMC:
            assert self.global_samples is not None
            return predict_ensemble(self.global_samples, inputs, self.lik)
        # FedAvg variants carry a single parameter vector.
        assert self.params is not None
        out = forward(self.params, inputs)
        if self.arch.task is Task.CLASSIFICATION:
            return ClassificationSummary(softmax(out))
        return RegressionSummary(out, np.full_like(out, self.lik.noise_variance))


def _client_sample_upload(
    client_id: int,
    shard: Dataset,
    arch: Architecture,
    lik: LikelihoodSpec,
    sampler_cfg: CsghmcConfig,
    master_seed: int,
) -> bytes:
    """One client's local MCMC run, returned as its serialized upload."""
    client_seed = mix_seed(master_seed, client_id)
    start = init_params(arch, mix_seed(client_seed, 1), InitMode.PRIOR_SAMPLE, lik.prior_variance)
    cfg = replace(sampler_cfg, seed=mix_seed(client_seed, 2))
    try:
        samples = csghmc_sample(start, shard, lik, cfg, client_id=client_id)
    except DivergenceError as err:
        raise DivergenceError(f"client {client_id}: {err}") from err
    return serialize_samples(samples)


def _resolve_order(n_clients: int, client_order: Sequence[int] | None) -> list[int]:
    order = list(range(n_clients)) if client_order is None else list(client_order)
    if sorted(order) != list(range(n_clients)):
        raise ValueError("client_order must be a permutation of range(n_clients)")
    return order


def run_predictive_bayes(
    parts: Sequence[Dataset],
    arch: Architecture,
    lik: LikelihoodSpec,
    sampler_cfg: CsghmcConfig,
    agg_cfg: AggregationConfig,
    prior_cfg: PriorPredictiveConfig,
    master_seed: int,
    client_order: Sequence[int] | None = None,
) -> tuple[GlobalEnsemble, CommLedger]:
    """One-round predictive-space aggregation: each client samples its local
    posterior once and uploads the draws; prediction aggregates the per-client
    predictive summaries against the prior predictive."""
    ledger = CommLedger(rounds=1)
    stored: dict[int, PosteriorSamples] = {}
    for cid in _resolve_order(len(parts), client_order):
        blob = _client_sample_upload(cid, parts[cid], arch, lik, sampler_cfg, master_seed)
        ledger.record_uplink(cid, len(blob))
        stored[cid] = deserialize_samples(blob)
    ensemble = GlobalEnsemble(
        method=METHOD_PREDICTIVE_BAYES,
        arch=arch,
        lik=lik,
        agg_cfg=agg_cfg,
        prior_cfg=prior_cfg,
        prior_seed=mix_seed(master_seed, SERVER_STREAM),
        client_samples=[stored[cid] for cid in sorted(stored)],
    )
    return ensemble, ledger


def run_ep_mcmc(
    parts: Sequence[Dataset],
    arch: Architecture,
    lik: LikelihoodSpec,
    sampler_cfg: CsghmcConfig,
    agg_cfg: AggregationConfig,
    global_sample_count: int,
    master_seed: int,
    client_order: Sequence[int] | None = None,
) -> tuple[GlobalEnsemble, CommLedger]:
    """One-round model-space baseline: fit a diagonal Gaussian to each client's
    uploaded draws, multiply them with a prior correction, and sample the
    product for prediction."""
    ledger = CommLedger(rounds=1)
    stored: dict[int, PosteriorSamples] = {}
    for cid in _resolve_order(len(parts), client_order):
        blob = _client_sample_upload(cid, parts[cid], arch, lik, sampler_cfg, master_seed)
        ledger.record_uplink(cid, len(blob))
        stored[cid] = deserialize_samples(blob)
    ensemble = GlobalEnsemble(
        method=METHOD_EP_MCMC,
        arch=arch,
        lik=lik,
        agg_cfg=agg_cfg,
        prior_cfg=None,
        prior_seed=mix_seed(master_seed, SERVER_STREAM),
    )
    locals_ = [fit_diag_gaussian(stored[cid]) for cid in sorted(stored)]
    total_n = sum(s.dataset_size for s in stored.values())
    ensemble.global_samples = ep_mcmc_aggregate(
        locals_,
        lik.prior_variance,
        agg_cfg,
        global_sample_count,
        seed=mix_seed(master_seed, SERVER_STREAM),
        events=ensemble.events,
        client_id=SERVER_STREAM,
        dataset_size=total_n,
    )
    return ensemble, ledger


def run_fedavg(
    parts: Sequence[Dataset],
    arch: Architecture,
    lik: LikelihoodSpec,
    sgd_cfg: SgdConfig,
    rounds: int,
    master_seed: int,
    client_order: Sequence[int] | None = None,
) -> tuple[GlobalEnsemble, CommLedger]:
    """FedAvg: R rounds of broadcast, local momentum SGD, and dataset-size
    weighted parameter averaging. The total epoch budget sgd_cfg.epochs is
    split across rounds (earlier rounds take the remainder)."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if sgd_cfg.epochs < rounds:
        raise ValueError(f"epoch budget {sgd_cfg.epochs} cannot cover {rounds} rounds")
    base, rem = divmod(sgd_cfg.epochs, rounds)
    epochs_per_round = [base + 1 if r < rem else base for r in range(rounds)]

    ledger = CommLedger(rounds=rounds)
    server_seed = mix_seed(master_seed, SERVER_STREAM)
    global_params = init_params(arch, mix_seed(server_seed, 1), InitMode.KAIMING_LIKE)
    counts = [p.n for p in parts]
    broadcast_bytes = message_size(arch, 1)
    for r in range(rounds):
        uploads: dict[int, ModelParams] = {}
        for cid in _resolve_order(len(parts), client_order):
            ledger.record_downlink(cid, broadcast_bytes)
            cfg = replace(
                sgd_cfg,
                epochs=epochs_per_round[r],
                seed=mix_seed(mix_seed(master_seed, cid), 1000 + r),
            )
            try:
                trained = sgd_train(global_params, parts[cid], lik, cfg)
            except DivergenceError as err:
                raise DivergenceError(f"client {cid}, round {r}: {err}") from err
            blob = serialize_samples(
                PosteriorSamples(cid, arch, parts[cid].n, trained.values[None, :])
            )
            ledger.record_uplink(cid, len(blob))
            decoded = deserialize_samples(blob)
            uploads[cid] = ModelParams(decoded.samples[0], arch)
        global_params = fedavg_params(
            [uploads[cid] for cid in sorted(uploads)], [counts[cid] for cid in sorted(uploads)]
        )
    ensemble = GlobalEnsemble(
        method=METHOD_FEDAVG if rounds > 1 else METHOD_FEDAVG_1ROUND,
        arch=arch,
        lik=lik,
        agg_cfg=AggregationConfig(),
        prior_cfg=None,
        params=global_params,
    )
    return ensemble, ledger


def _arch_to_dict(arch: Architecture) -> dict:
    return {
        "layer_sizes": list(arch.layer_sizes),
        "task": arch.task.value,
        "activation": arch.activation.value,
    }


def _arch_from_dict(d: dict) -> Architecture:
    return Architecture(tuple(d["layer_sizes"]), Task(d["task"]), Activation(d["activation"]))


def _prior_to_dict(cfg: PriorPredictiveConfig | None) -> dict | None:
    if cfg is None:
        return None
    return {
        "mode": cfg.mode.value,
        "mean": None if cfg.mean is None else cfg.mean.tolist(),
        "variance": None if cfg.variance is None else cfg.variance.tolist(),
        "sample_count": cfg.sample_count,
    }


def _prior_from_dict(d: dict | None) -> PriorPredictiveConfig | None:
    if d is None:
        return None
    return PriorPredictiveConfig(
        mode=d["mode"],
        mean=None if d["mean"] is None else np.asarray(d["mean"]),
        variance=None if d["variance"] is None else np.asarray(d["variance"]),
        sample_count=d["sample_count"],
    )


def save_ensemble(ensemble: GlobalEnsemble, directory: str | Path, provenance: dict | None = None) -> Path:
    """Write an ensemble as manifest.json plus .fpsb sample blobs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "format": "fedpred-ensemble",
        "version": 1,
        "method": ensemble.method,
        "arch": _arch_to_dict(ensemble.arch),
        "likelihood": {
            "noise_variance": ensemble.lik.noise_variance,
            "prior_variance": ensemble.lik.prior_variance,
        },
        "aggregation": {
            "sign_convention": ensemble.agg_cfg.sign_convention.value,
            "precision_floor": ensemble.agg_cfg.precision_floor,
            "prob_floor": ensemble.agg_cfg.prob_floor,
        },
        "prior_predictive": _prior_to_dict(ensemble.prior_cfg),
        "prior_seed": ensemble.prior_seed,
        "provenance": provenance or {},
    }
    if ensemble.client_samples is not None:
        names = []
        for s in ensemble.client_samples:
            name = f"client_{s.client_id:03d}.fpsb"
            (directory / name).write_bytes(serialize_samples(s))
            names.append(name)
        manifest["client_files"] = names
    if ensemble.global_samples is not None:
        (directory / "global.fpsb").write_bytes(serialize_samples(ensemble.global_samples))
        manifest["global_file"] = "global.fpsb"
    if ensemble.params is not None:
        blob = serialize_samples(
            PosteriorSamples(SERVER_STREAM, ensemble.arch, 1, ensemble.params.values[None, :])
        )
        (directory / "params.fpsb").write_bytes(blob)
        manifest["params_file"] = "params.fpsb"
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return directory


def load_ensemble(directory: str | Path) -> tuple[GlobalEnsemble, dict]:
    """Load an ensemble directory; returns (ensemble, provenance)."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if directory.is_file():
        manifest_path, directory = directory, directory.parent
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "fedpred-ensemble":
        raise ValueError(f"{manifest_path} is not an ensemble manifest")
    agg = manifest["aggregation"]
    ensemble = GlobalEnsemble(
        method=manifest["method"],
        arch=_arch_from_dict(manifest["arch"]),
        lik=LikelihoodSpec(**manifest["likelihood"]),
        agg_cfg=AggregationConfig(
            sign_convention=agg["sign_convention"],
            precision_floor=agg["precision_floor"],
            prob_floor=agg["prob_floor"],
        ),
        prior_cfg=_prior_from_dict(manifest["prior_predictive"]),
        prior_seed=manifest["prior_seed"],
    )
    if "client_files" in manifest:
        ensemble.client_samples = [
            deserialize_samples((directory / name).read_bytes())
            for name in manifest["client_files"]
        ]
    if "global_file" in manifest:
        ensemble.global_samples = deserialize_samples(
            (directory / manifest["global_file"]).read_bytes()
        )
    if "params_file" in manifest:
        decoded = deserialize_samples((directory / manifest["params_file"]).read_bytes())
        ensemble.params = ModelParams(decoded.samples[0], ensemble.arch)
    return ensemble, manifest.get("provenance", {})

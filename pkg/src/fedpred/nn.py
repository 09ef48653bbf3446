"""Dense feed-forward networks with analytic gradients of the negative log posterior.

Parameters live in a single flat float64 vector so they can be averaged,
serialized, and sampled without touching layer structure. The layout is, per
layer: the weight matrix (fan_in x fan_out, row-major) followed by the bias
vector (fan_out).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DivergenceError


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class Activation(str, Enum):
    RELU = "relu"


class InitMode(str, Enum):
    PRIOR_SAMPLE = "prior_sample"
    KAIMING_LIKE = "kaiming_like"


@dataclass(frozen=True)
class Architecture:
    """Shape of a dense network: layer sizes from input to output, inclusive."""

    layer_sizes: tuple[int, ...]
    task: Task
    activation: Activation = Activation.RELU

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "activation", Activation(self.activation))
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output dim")
        if any(s < 1 for s in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {sizes}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def parameter_count(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_pairs())

    def layer_pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))


@dataclass(frozen=True)
class ModelParams:
    """Flat float64 parameter vector tied to an architecture."""

    values: np.ndarray
    arch: Architecture

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError(f"parameter vector must be 1-D, got shape {values.shape}")
        expected = self.arch.parameter_count
        if values.shape[0] != expected:
            raise ValueError(
                f"parameter vector has length {values.shape[0]}, "
                f"architecture {self.arch.layer_sizes} needs {expected}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("parameter vector contains non-finite entries")


@dataclass(frozen=True)
class Batch:
    """A minibatch of inputs and targets (labels for classification)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", np.asarray(self.targets))
        if inputs.shape[0] < 1:
            raise ValueError("batch must contain at least one example")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class LikelihoodSpec:
    """Observation noise (regression) and isotropic Gaussian weight prior."""

    noise_variance: float = 0.1
    prior_variance: float = 1.0

    def __post_init__(self) -> None:
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        if not self.prior_variance > 0:
            raise ValueError("prior_variance must be positive")


def unpack_layers(arch: Architecture, values: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into per-layer (weights, bias) views."""
    layers = []
    offset = 0
    for fan_in, fan_out in arch.layer_pairs():
        w = values[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = values[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def init_params(
    arch: Architecture,
    seed: int,
    mode: InitMode = InitMode.KAIMING_LIKE,
    prior_variance: float = 1.0,
) -> ModelParams:
    """Draw an initial parameter vector, deterministic in (arch, seed, mode).

    PRIOR_SAMPLE draws every entry i.i.d. from N(0, prior_variance);
    KAIMING_LIKE draws weights from N(0, 2/fan_in) and zeroes biases.
    """
    mode = InitMode(mode)
    rng = np.random.default_rng(seed)
    if mode is InitMode.PRIOR_SAMPLE:
        values = rng.normal(0.0, math.sqrt(prior_variance), size=arch.parameter_count)
        return ModelParams(values, arch)
    values = np.empty(arch.parameter_count)
    offset = 0
    for fan_in, fan_out in arch.layer_pairs():
        n_w = fan_in * fan_out
        values[offset : offset + n_w] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=n_w)
        offset += n_w
        values[offset : offset + fan_out] = 0.0
        offset += fan_out
    return ModelParams(values, arch)


def _forward_cached(
    params: ModelParams, inputs: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Forward pass returning (outputs, layer inputs, pre-activations)."""
    layers = unpack_layers(params.arch, params.values)
    h = inputs
    hiddens = [h]
    pre_acts = []
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        pre_acts.append(z)
        if i < len(layers) - 1:
            h = np.maximum(z, 0.0)
            hiddens.append(h)
    return pre_acts[-1], hiddens, pre_acts


def forward(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Raw network outputs (regression means or classification logits).

    Accepts a (b, input_dim) matrix or a single input vector.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != params.arch.input_dim:
        raise ValueError(
            f"inputs have {inputs.shape[1]} features, "
            f"architecture expects {params.arch.input_dim}"
        )
    out, _, _ = _forward_cached(params, inputs)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max-subtraction before exponentiation)."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _batch_nll(out: np.ndarray, batch: Batch, lik: LikelihoodSpec, task: Task) -> float:
    if task is Task.REGRESSION:
        targets = np.atleast_2d(np.asarray(batch.targets, dtype=np.float64))
        resid = out - targets
        const = 0.5 * math.log(2.0 * math.pi * lik.noise_variance)
        return const * resid.size + float(np.sum(resid**2)) / (2.0 * lik.noise_variance)
    labels = np.asarray(batch.targets, dtype=np.int64).ravel()
    log_p = _log_softmax(out)
    return -float(np.sum(log_p[np.arange(out.shape[0]), labels]))


def neg_log_posterior(
    params: ModelParams, batch: Batch, lik: LikelihoodSpec, total_n: int
) -> float:
    """Minibatch estimate of the full-data negative log posterior.

    The data term is rescaled by total_n / batch_size so its expectation over
    minibatches equals the full-data value; the prior term ||w||^2 / (2 s_w^2)
    is never rescaled.
    """
    out = forward(params, batch.inputs)
    scale = total_n / batch.size
    prior = float(params.values @ params.values) / (2.0 * lik.prior_variance)
    return scale * _batch_nll(out, batch, lik, params.arch.task) + prior


def neg_log_posterior_grad(
    params: ModelParams, batch: Batch, lik: LikelihoodSpec, total_n: int
) -> tuple[float, np.ndarray]:
    """Value and exact analytic gradient of the rescaled negative log posterior.

    Raises DivergenceError if the value or any gradient entry is non-finite;
    nothing is clamped.
    """
    arch = params.arch
    inputs = np.atleast_2d(np.asarray(batch.inputs, dtype=np.float64))
    if inputs.shape[1] != arch.input_dim:
        raise ValueError(
            f"inputs have {inputs.shape[1]} features, architecture expects {arch.input_dim}"
        )
    # Overflow is detected by the finiteness check below, not by warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        out, hiddens, pre_acts = _forward_cached(params, inputs)
        nll = _batch_nll(out, batch, lik, arch.task)

        if arch.task is Task.REGRESSION:
            targets = np.atleast_2d(np.asarray(batch.targets, dtype=np.float64))
            delta = (out - targets) / lik.noise_variance
        else:
            labels = np.asarray(batch.targets, dtype=np.int64).ravel()
            delta = softmax(out)
            delta[np.arange(out.shape[0]), labels] -= 1.0

        layers = unpack_layers(arch, params.values)
        grad = np.empty_like(params.values)
        grad_views = unpack_layers(arch, grad)
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            gw, gb = grad_views[i]
            gw[:] = hiddens[i].T @ delta
            gb[:] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ w.T) * (pre_acts[i - 1] > 0.0)

        scale = total_n / batch.size
        value = scale * nll + float(params.values @ params.values) / (2.0 * lik.prior_variance)
        grad *= scale
        grad += params.values / lik.prior_variance

    if not math.isfinite(value) or not np.all(np.isfinite(grad)):
        raise DivergenceError("negative log posterior produced non-finite value or gradient")
    return value, grad

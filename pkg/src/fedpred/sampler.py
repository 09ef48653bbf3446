"""Local training procedures: momentum SGD and cyclical stochastic-gradient
Hamiltonian Monte Carlo (cSGHMC).

The cSGHMC chain runs in cycles. Within a cycle of T steps the step size
follows the cosine schedule a_t = (a0 / 2) * (cos(pi * t / T) + 1); the first
`exploration_fraction` of the cycle uses noise-free momentum updates, the rest
uses the SGHMC update

    v <- (1 - friction) * v - a_t * g + N(0, 2 * friction * a_t * I)
    w <- w + v

with g the rescaled minibatch gradient of the negative log posterior.
Parameter snapshots are collected evenly spaced over the final 20% of each
cycle, where the schedule has driven the step size low.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset
from .errors import ConfigError, DivergenceError
from .nn import Architecture, Batch, LikelihoodSpec, ModelParams, neg_log_posterior_grad

SAMPLING_WINDOW_FRACTION = 0.2


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass(frozen=True)
class CsghmcConfig:
    cycles: int
    epochs_per_cycle: int
    initial_step: float
    batch_size: int
    samples_per_cycle: int = 1
    exploration_fraction: float = 0.8
    friction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.cycles < 1 or self.epochs_per_cycle < 1 or self.samples_per_cycle < 1:
            raise ValueError("cycles, epochs_per_cycle, samples_per_cycle must be positive")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if not 0.0 <= self.exploration_fraction < 1.0:
            raise ValueError("exploration_fraction must lie in [0, 1)")
        if not 0.0 < self.friction <= 1.0:
            raise ValueError("friction must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    @property
    def sample_count(self) -> int:
        return self.cycles * self.samples_per_cycle


@dataclass(frozen=True)
class PosteriorSamples:
    """Ordered parameter-vector draws from one client's posterior."""

    client_id: int
    arch: Architecture
    dataset_size: int
    samples: np.ndarray  # (S, parameter_count)

    def __post_init__(self) -> None:
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError(f"samples must be a nonempty (S, P) matrix, got {samples.shape}")
        if samples.shape[1] != self.arch.parameter_count:
            raise ValueError(
                f"samples have {samples.shape[1]} columns, "
                f"architecture needs {self.arch.parameter_count}"
            )
        if self.dataset_size < 1:
            raise ValueError("dataset_size must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite entries")

    def __len__(self) -> int:
        return self.samples.shape[0]

    def param(self, j: int) -> ModelParams:
        return ModelParams(self.samples[j], self.arch)


def _epoch_order(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n)


def sgd_train(
    start: ModelParams, data: Dataset, lik: LikelihoodSpec, cfg: SgdConfig
) -> ModelParams:
    """Momentum SGD on the minibatch negative log posterior.

    Steps use the objective's gradient divided by the dataset size, so
    learning_rate keeps its conventional per-example scale (the minimizer is
    unchanged). Epoch order is a seeded shuffle; the result is deterministic
    in (start, data, cfg).
    """
    if data.task is not start.arch.task:
        raise ValueError(f"data task {data.task} does not match architecture {start.arch.task}")
    rng = np.random.default_rng(cfg.seed)
    w = start.values.copy()
    v = np.zeros_like(w)
    n = data.n
    for epoch in range(cfg.epochs):
        order = _epoch_order(n, rng)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            batch = Batch(data.features[idx], data.targets[idx])
            try:
                _, grad = neg_log_posterior_grad(ModelParams(w, start.arch), batch, lik, n)
            except DivergenceError as err:
                raise DivergenceError(f"SGD diverged during epoch {epoch}: {err}") from err
            v = cfg.momentum * v - (cfg.learning_rate / n) * grad
            w += v
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"SGD produced non-finite parameters after epoch {epoch}")
    return ModelParams(w, start.arch)


def cyclical_step_size(step: int, steps_per_cycle: int, initial_step: float) -> float:
    """Cosine schedule within one cycle: a0 at step 0, ~0 at the last step."""
    return 0.5 * initial_step * (math.cos(math.pi * step / steps_per_cycle) + 1.0)


def snapshot_steps(steps_per_cycle: int, samples_per_cycle: int) -> list[int]:
    """Step indices, evenly spaced over the final 20% of a cycle, to snapshot."""
    last = steps_per_cycle - 1
    # The final step always counts as part of the sampling window.
    window_start = min(int(math.ceil((1.0 - SAMPLING_WINDOW_FRACTION) * steps_per_cycle)), last)
    if samples_per_cycle == 1:
        return [last]
    steps = np.round(np.linspace(window_start, last, samples_per_cycle)).astype(int)
    if len(np.unique(steps)) != samples_per_cycle:
        raise ConfigError(
            f"samples_per_cycle={samples_per_cycle} does not fit in a sampling window "
            f"of {last - window_start + 1} steps"
        )
    return [int(s) for s in steps]


def csghmc_chain(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    cfg: CsghmcConfig,
    steps_per_cycle: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run the cyclical SGHMC chain against an arbitrary gradient oracle.

    Returns the (cycles * samples_per_cycle, dim) snapshot matrix in
    collection order. Momentum is reset at the start of every cycle.
    """
    snap_at = set(snapshot_steps(steps_per_cycle, cfg.samples_per_cycle))
    explore_until = cfg.exploration_fraction * steps_per_cycle
    w = np.array(start, dtype=np.float64, copy=True)
    out = np.empty((cfg.sample_count, w.shape[0]))
    collected = 0
    for cycle in range(cfg.cycles):
        v = np.zeros_like(w)
        for t in range(steps_per_cycle):
            a = cyclical_step_size(t, steps_per_cycle, cfg.initial_step)
            try:
                grad = grad_fn(w)
            except DivergenceError as err:
                raise DivergenceError(
                    f"cSGHMC diverged at cycle {cycle}, step {t} of {steps_per_cycle}: {err}"
                ) from err
            v = (1.0 - cfg.friction) * v - a * grad
            if t >= explore_until:
                v += rng.normal(0.0, math.sqrt(2.0 * cfg.friction * a), size=w.shape)
            w = w + v
            if not np.all(np.isfinite(w)):
                raise DivergenceError(
                    f"cSGHMC diverged at cycle {cycle}, step {t} of {steps_per_cycle}"
                )
            if t in snap_at:
                out[collected] = w
                collected += 1
    return out


def csghmc_sample(
    start: ModelParams,
    data: Dataset,
    lik: LikelihoodSpec,
    cfg: CsghmcConfig,
    client_id: int = 0,
) -> PosteriorSamples:
    """Draw posterior samples for one client's dataset with cyclical SGHMC."""
    if data.task is not start.arch.task:
        raise ValueError(f"data task {data.task} does not match architecture {start.arch.task}")
    n = data.n
    n_batches = math.ceil(n / cfg.batch_size)
    steps_per_cycle = cfg.epochs_per_cycle * n_batches
    rng = np.random.default_rng(cfg.seed)

    state = {"step": 0, "order": np.empty(0, dtype=np.int64)}

    def grad_fn(w: np.ndarray) -> np.ndarray:
        if state["step"] % n_batches == 0:
            state["order"] = _epoch_order(n, rng)
        lo = (state["step"] % n_batches) * cfg.batch_size
        idx = state["order"][lo : lo + cfg.batch_size]
        state["step"] += 1
        batch = Batch(data.features[idx], data.targets[idx])
        _, grad = neg_log_posterior_grad(ModelParams(w, start.arch), batch, lik, n)
        return grad

    samples = csghmc_chain(grad_fn, start.values, cfg, steps_per_cycle, rng)
    return PosteriorSamples(client_id, start.arch, n, samples)

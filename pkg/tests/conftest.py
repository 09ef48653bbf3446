import numpy as np
import pytest

from fedpred import Architecture, Dataset, LikelihoodSpec, Task


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_regression_arch():
    return Architecture((2, 5, 1), Task.REGRESSION)


@pytest.fixture
def small_classification_arch():
    return Architecture((2, 5, 3), Task.CLASSIFICATION)


@pytest.fixture
def lik():
    return LikelihoodSpec(noise_variance=0.3, prior_variance=2.0)


def make_regression_dataset(n: int, d: int, seed: int) -> Dataset:
    gen = np.random.default_rng(seed)
    x = gen.normal(size=(n, d))
    y = gen.normal(size=(n, 1))
    return Dataset(x, y, Task.REGRESSION)


def make_classification_dataset(n: int, d: int, k: int, seed: int) -> Dataset:
    gen = np.random.default_rng(seed)
    x = gen.normal(size=(n, d))
    labels = gen.integers(0, k, size=n)
    return Dataset(x, labels, Task.CLASSIFICATION, num_classes=k)

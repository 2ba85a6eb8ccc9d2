import numpy as np
import pytest

from noisesig import Dataset, ObjectiveSpec, stackloss


@pytest.fixture(scope="session")
def stack() -> Dataset:
    return stackloss()


@pytest.fixture(scope="session")
def l1() -> ObjectiveSpec:
    return ObjectiveSpec.parse("l1")


@pytest.fixture(scope="session")
def l2() -> ObjectiveSpec:
    return ObjectiveSpec.parse("l2")


@pytest.fixture(scope="session")
def huber() -> ObjectiveSpec:
    return ObjectiveSpec.parse("huber:1.345")


@pytest.fixture
def dataset_factory():
    """Small synthetic regressions: y = 1 + X @ (1..k) + noise."""

    def make(seed: int, n: int = 15, k: int = 2, sigma: float = 0.5,
             beta=None) -> Dataset:
        g = np.random.default_rng(seed)
        X = g.normal(size=(n, k))
        if beta is None:
            beta = np.arange(1, k + 1, dtype=float)
        y = 1.0 + X @ np.asarray(beta, float) + g.normal(scale=sigma, size=n)
        return Dataset(y, X, tuple(f"x{j + 1}" for j in range(k)))

    return make

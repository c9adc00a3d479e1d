import numpy as np
import pytest

from subcover.models import GammaModel, StableModel
from subcover.paths import SimConfig, sample_skeleton


@pytest.fixture(scope="session")
def stable_half():
    return StableModel(0.5)


@pytest.fixture(scope="session")
def gamma_unit():
    return GammaModel(rate=1.0, shape=1.0)


def sample_batch(model, n, t=1.0, eps=1e-6, seed=424242):
    return [sample_skeleton(model, SimConfig(t=t, eps=eps, seed=seed,
                                             replica_index=r))
            for r in range(n)]


@pytest.fixture(scope="session")
def stable_batch(stable_half):
    return sample_batch(stable_half, 50)


@pytest.fixture(scope="session")
def gamma_batch(gamma_unit):
    return sample_batch(gamma_unit, 50)

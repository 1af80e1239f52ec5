import numpy as np
import pytest

from interlink.data import OverlapSpec, sample_domain_pair

from synth import random_source


@pytest.fixture(scope="session")
def small_source():
    return random_source(n_entities=40, n_predicates=3, n_facts=300, seed=0)


@pytest.fixture(scope="session")
def small_pair(small_source):
    entities, predicates, store = small_source
    return sample_domain_pair(
        entities, predicates, store, OverlapSpec(level=0.2, target_size=10, seed=1)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

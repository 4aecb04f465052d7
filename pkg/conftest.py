import numpy as np
import pytest

from hyper_core_modules.structures import Hypergraph, ObservationMatrix, RateParams, project_labels
from hyper_core_modules.likelihood import generate_observations
from stat_modules.config import Hyperparams, McmcConfig
from stat_modules.math_core import make_rng


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def make_generator():
    """Factory for independent seeded generators inside one test."""
    return make_rng


@pytest.fixture
def hp():
    return Hyperparams()


@pytest.fixture
def tiny_mcmc():
    """Short chains for pipeline tests: counts in gibbs iterations, 20 proposals each."""
    return McmcConfig(window_w=5, iter_min=10, iter_max=30, iteration_unit="sweep",
                      proposals_per_sweep=20, n_chains=1, n_samples=5, sample_stride=1)


@pytest.fixture
def small_hypergraph():
    return Hypergraph(8, [(0, 1), (2, 3), (4, 5), (0, 2)], [(0, 1, 2), (5, 6, 7)])


@pytest.fixture
def small_data(small_hypergraph):
    mu = RateParams(0.1, 8.0, 15.0)
    x = generate_observations(project_labels(small_hypergraph), mu, make_rng(7))
    return small_hypergraph, mu, x

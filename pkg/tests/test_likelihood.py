import math

import numpy as np
import pytest

from hyper_core_modules.likelihood import (
    generate_observations,
    log_factorial_sum,
    log_joint,
    log_likelihood,
    log_likelihood_from_stats,
    log_parameter_prior,
    log_structure_prior,
    sufficient_stats,
)
from hyper_core_modules.structures import (
    CategoricalGraph,
    GraphProbs,
    Hypergraph,
    HypergraphProbs,
    LabelMatrix,
    ObservationMatrix,
    RateParams,
    project_labels,
)
from stat_modules.config import Hyperparams
from stat_modules.math_core import log_beta_pdf, log_gamma_pdf, make_rng


def test_single_pair_likelihoods():
    mu = RateParams(1.0, 2.0, 3.0)
    assert log_likelihood(ObservationMatrix(2, [0]), LabelMatrix(2, [0]), mu) == pytest.approx(-1.0)
    expected = 3 * math.log(2.0) - 2.0 - math.log(6.0)
    value = log_likelihood(ObservationMatrix(2, [3]), LabelMatrix(2, [1]), mu)
    assert value == pytest.approx(expected)
    assert value == pytest.approx(-1.712, abs=1e-3)


def test_positive_count_at_zero_rate_is_impossible():
    mu = RateParams(0.0, 2.0, 3.0)
    assert log_likelihood(ObservationMatrix(2, [1]), LabelMatrix(2, [0]), mu) == -math.inf
    assert log_likelihood(ObservationMatrix(2, [0]), LabelMatrix(2, [0]), mu) == 0.0


def test_hidden_edges_leave_likelihood_unchanged(rng):
    a = Hypergraph(5, [(0, 4)], [(1, 2, 3)])
    b = Hypergraph(5, [(0, 4), (1, 2), (2, 3)], [(1, 2, 3)])
    mu = RateParams(0.3, 4.0, 9.0)
    x = generate_observations(project_labels(a), mu, rng)
    assert log_likelihood(x, project_labels(a), mu) == log_likelihood(x, project_labels(b), mu)


def test_sufficient_stats():
    x = ObservationMatrix(3, [5, 0, 2])
    stats = sufficient_stats(x, LabelMatrix(3, [1, 0, 2]))
    assert stats.X.tolist() == [0, 5, 2]
    assert stats.L.tolist() == [1, 1, 1]
    zero = sufficient_stats(x, LabelMatrix(3, [0, 0, 0]))
    assert zero.X.tolist() == [7, 0, 0]
    assert zero.L.tolist() == [3, 0, 0]


def test_likelihood_from_stats_plus_constant_is_full_likelihood(rng):
    labels = LabelMatrix(6, rng.integers(0, 3, size=15))
    mu = RateParams(0.5, 3.0, 7.0)
    x = generate_observations(labels, mu, rng)
    split = log_likelihood_from_stats(sufficient_stats(x, labels), mu) - log_factorial_sum(x)
    assert split == pytest.approx(log_likelihood(x, labels, mu), abs=1e-9)


def test_generate_observations(rng):
    labels = LabelMatrix(150, np.where(np.arange(11175) < 10_000, 1, 0))
    mu = RateParams(0.0, 6.0, 9.0)
    x = generate_observations(labels, mu, rng)
    ones = x.values[labels.values == 1]
    assert abs(ones.mean() - 6.0) < 3 * math.sqrt(6.0 / ones.size)
    assert np.all(x.values[labels.values == 0] == 0)
    again = generate_observations(labels, mu, make_rng(12345))
    assert again == x


def test_structure_priors():
    h = Hypergraph(5, [(0, 1), (1, 2)], [(0, 1, 2)])
    q, p = 0.2, 0.05
    expected = 2 * math.log(q) + 8 * math.log(1 - q) + math.log(p) + 9 * math.log(1 - p)
    assert log_structure_prior(h, HypergraphProbs(q, p)) == pytest.approx(expected)
    g = CategoricalGraph(5, [(0, 1)], [(2, 3), (3, 4)])
    q1, q2 = 0.3, 0.1
    expected = 2 * math.log(q2) + 8 * math.log(1 - q2) + math.log(q1) + 7 * math.log(1 - q1)
    assert log_structure_prior(g, GraphProbs(q1, q2)) == pytest.approx(expected)
    with pytest.raises(TypeError):
        log_structure_prior(h, GraphProbs(q1, q2))


def test_parameter_prior_respects_ordering():
    hp = Hyperparams()
    probs = GraphProbs(0.1, 0.2)
    assert log_parameter_prior(probs, RateParams(0.1, 5.0, 3.0), hp, "categorical") == -math.inf
    ordered = RateParams(0.1, 3.0, 5.0)
    expected = (log_beta_pdf(0.1, hp.xi, hp.zeta) + log_beta_pdf(0.2, hp.xi, hp.zeta)
                + sum(log_gamma_pdf(m, a, b) for m, a, b in zip(ordered.as_tuple(), hp.alphas, hp.betas)))
    assert log_parameter_prior(probs, ordered, hp, "categorical") == pytest.approx(expected)
    # the hypergraph ordering leaves μ1 and μ2 unordered
    assert math.isfinite(log_parameter_prior(HypergraphProbs(0.1, 0.2), RateParams(0.1, 5.0, 3.0), hp, "hypergraph"))


def test_log_joint_decomposes(small_data, hp):
    h, mu, x = small_data
    probs = HypergraphProbs(0.1, 0.02)
    expected = (log_likelihood(x, project_labels(h), mu) + log_factorial_sum(x)
                + log_structure_prior(h, probs) + log_parameter_prior(probs, mu, hp, "hypergraph"))
    assert log_joint(h, x, mu, probs, hp) == pytest.approx(expected, abs=1e-9)

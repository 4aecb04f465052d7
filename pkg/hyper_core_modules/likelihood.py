#!/usr/bin/env python3
"""
hyper_core_modules/likelihood.py

Poisson observation model: log-likelihood, sufficient statistics, synthetic
observations and the unnormalized log joint posterior used by the sampler.
"""
import logging
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from hyper_core_modules.structures import (
    GraphProbs,
    Hypergraph,
    HypergraphProbs,
    LabelMatrix,
    ObservationMatrix,
    RateParams,
    Structure,
    StructureProbs,
    check_same_n,
    labels_of,
    n_pairs,
    n_triplets,
)
from stat_modules.config import Hyperparams
from stat_modules.math_core import log_beta_pdf, log_gamma_pdf

logger = logging.getLogger(__name__)


class SufficientStats(NamedTuple):
    """X_k (count sums) and L_k (pair counts) for labels k = 0, 1, 2."""
    X: np.ndarray
    L: np.ndarray


# ─── Sufficient statistics ────────────────────────────────────────────────────
def sufficient_stats(x: ObservationMatrix, labels: LabelMatrix) -> SufficientStats:
    check_same_n(x, labels)
    X = np.bincount(labels.values, weights=x.values, minlength=3).astype(np.int64)
    L = np.bincount(labels.values, minlength=3).astype(np.int64)
    return SufficientStats(X, L)


def log_factorial_sum(x: ObservationMatrix) -> float:
    """Σ log(x_ij!), computed once per matrix."""
    cached = getattr(x, "_log_factorial_sum", None)
    if cached is None:
        cached = float(gammaln(x.values + 1.0).sum())
        x._log_factorial_sum = cached
    return cached


# ─── Likelihood ───────────────────────────────────────────────────────────────
def log_likelihood_from_stats(stats: SufficientStats, mu: RateParams) -> float:
    """
    Label-dependent part of the log-likelihood: Σ_k X_k log μ_k − L_k μ_k.
    The constant −Σ log(x_ij!) is left out.
    """
    m = mu.as_array()
    return float(np.sum(xlogy(stats.X, m) - stats.L * m))


def log_likelihood(x: ObservationMatrix, labels: LabelMatrix, mu: RateParams) -> float:
    """
    Σ_{i<j} [x_ij log μ_ℓij − μ_ℓij − log(x_ij!)]
    Args:
        x (ObservationMatrix): observed counts
        labels (LabelMatrix): interaction types
        mu (RateParams): Poisson means per label
    Returns:
        float: full log-likelihood (−inf when a positive count meets a zero rate)
    """
    check_same_n(x, labels)
    rates = mu.as_array()[labels.values]
    terms = xlogy(x.values, rates) - rates
    return float(terms.sum()) - log_factorial_sum(x)


# ─── Synthetic observations ───────────────────────────────────────────────────
def generate_observations(labels: LabelMatrix, mu: RateParams,
                          rng: np.random.Generator) -> ObservationMatrix:
    """x_ij ~ Poisson(μ_ℓij), independently per pair."""
    rates = mu.as_array()[labels.values]
    return ObservationMatrix(labels.n, rng.poisson(rates).astype(np.int64))


# ─── Priors ───────────────────────────────────────────────────────────────────
def log_structure_prior(structure: Structure, probs: StructureProbs) -> float:
    """log P(H | q, p) or log P(G | q1, q2)."""
    n2 = n_pairs(structure.n)
    if isinstance(structure, Hypergraph):
        if not isinstance(probs, HypergraphProbs):
            raise TypeError("hypergraph needs HypergraphProbs")
        n3 = n_triplets(structure.n)
        h1, h2 = structure.h1, structure.h2
        return float(xlogy(h1, probs.q) + xlog1py(n2 - h1, -probs.q)
                     + xlogy(h2, probs.p) + xlog1py(n3 - h2, -probs.p))
    if not isinstance(probs, GraphProbs):
        raise TypeError("categorical graph needs GraphProbs")
    m1, m2 = structure.m1, structure.m2
    # strong edges first, weak edges among the remaining pairs
    return float(xlogy(m2, probs.q2) + xlog1py(n2 - m2, -probs.q2)
                 + xlogy(m1, probs.q1) + xlog1py(n2 - m1 - m2, -probs.q1))


def log_parameter_prior(probs: StructureProbs, mu: RateParams, hp: Hyperparams, model: str) -> float:
    """
    Beta(ξ, ζ) on each structure probability, independent Gamma(α_k, β_k) on
    the rates restricted to the model's ordering (up to its normalizer).
    """
    if not mu.satisfies_order(model):
        return -np.inf
    if isinstance(probs, HypergraphProbs):
        values = (probs.q, probs.p)
    else:
        values = (probs.q1, probs.q2)
    total = sum(log_beta_pdf(v, hp.xi, hp.zeta) for v in values)
    for m, a, b in zip(mu.as_tuple(), hp.alphas, hp.betas):
        total += log_gamma_pdf(m, a, b)
    return float(total)


def log_joint(structure: Structure, x: ObservationMatrix, mu: RateParams,
              probs: StructureProbs, hp: Hyperparams) -> float:
    """Unnormalized log posterior; drops log P(X) and Σ log(x_ij!)."""
    model = "hypergraph" if isinstance(structure, Hypergraph) else "categorical"
    stats = sufficient_stats(x, labels_of(structure))
    return (log_likelihood_from_stats(stats, mu)
            + log_structure_prior(structure, probs)
            + log_parameter_prior(probs, mu, hp, model))


__all__ = [
    "SufficientStats",
    "sufficient_stats",
    "log_factorial_sum",
    "log_likelihood_from_stats",
    "log_likelihood",
    "generate_observations",
    "log_structure_prior",
    "log_parameter_prior",
    "log_joint",
]

#!/usr/bin/env python3
"""
hyper_core_modules/mixture.py

Poisson mixture EM on the flattened pair counts and the chain initial states
built from it (or from a known ground truth).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from hyper_core_modules.likelihood import log_joint, log_likelihood
from hyper_core_modules.structures import (
    CategoricalGraph,
    GraphProbs,
    Hypergraph,
    HypergraphProbs,
    ObservationMatrix,
    RateParams,
    Structure,
    graph_from_labels,
    labels_of,
    n_pairs,
    n_triplets,
)
from hyper_core_modules.trace import PosteriorSample
from stat_modules.config import Hyperparams
from stat_modules.errors import ConfigError

logger = logging.getLogger(__name__)

EM_TOL      = 1e-8
EM_MAX_ITER = 500
JITTER      = 1e-3
PROB_FLOOR  = 1e-9
RATE_FLOOR  = 1e-6


@dataclass
class MixtureFit:
    """EM result with components sorted so that mu_hat is ascending."""
    mu_hat: np.ndarray
    weights: np.ndarray
    expected_counts: np.ndarray          # m̂_k = Σ_ij responsibility_k(ij)
    loglik_path: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _initial_means(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    distinct = np.unique(values)
    if distinct.size >= k:
        # quantiles of the distinct values: robust when one value (0) dominates
        start = np.quantile(distinct, (np.arange(k) + 0.5) / k)
    else:
        logger.warning("only %d distinct values for %d components; collapsing with jitter", distinct.size, k)
        start = np.full(k, values.mean())
    jitter = 1.0 + JITTER * (np.arange(k) - (k - 1) / 2.0 + rng.uniform(-0.1, 0.1, size=k))
    return np.maximum(start, RATE_FLOOR) * jitter


def poisson_mixture_em(x: ObservationMatrix, k: int = 3, rng: Optional[np.random.Generator] = None,
                       tol: float = EM_TOL, max_iter: int = EM_MAX_ITER) -> MixtureFit:
    """
    Maximum likelihood k-component Poisson mixture on the pair counts.
    Args:
        x (ObservationMatrix): observations
        k (int): number of components
        rng: generator for the initial jitter
    Returns:
        MixtureFit
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    values, freq = np.unique(x.values, return_counts=True)
    v = values.astype(float)
    f = freq.astype(float)
    total = f.sum()

    mu = _initial_means(x.values.astype(float), k, rng)
    w = np.full(k, 1.0 / k)
    path: List[float] = []
    converged = False
    it = 0
    resp = None
    for it in range(1, max_iter + 1):
        log_mu = np.log(np.maximum(mu, 1e-300))
        comp = np.log(w)[None, :] + v[:, None] * log_mu[None, :] - mu[None, :] - gammaln(v + 1.0)[:, None]
        norm = logsumexp(comp, axis=1)
        path.append(float(np.dot(f, norm)))
        resp = np.exp(comp - norm[:, None])
        nk = f @ resp
        w = np.maximum(nk / total, 1e-300)
        mu = np.where(nk > 0, (f * v) @ resp / np.maximum(nk, 1e-300), mu)
        if len(path) > 1 and abs(path[-1] - path[-2]) < tol * max(1.0, abs(path[-2])):
            converged = True
            break

    order = np.argsort(mu, kind="stable")
    nk = (f @ resp)[order] if resp is not None else np.zeros(k)
    fit = MixtureFit(mu_hat=mu[order], weights=w[order] / w.sum(), expected_counts=nk,
                     loglik_path=path, iterations=it, converged=converged)
    logger.info("poisson mixture EM: mu=%s weights=%s after %d iterations",
                np.round(fit.mu_hat, 4).tolist(), np.round(fit.weights, 4).tolist(), it)
    return fit


# ─── Initial states ───────────────────────────────────────────────────────────
def _strict_order(mu: np.ndarray) -> RateParams:
    """Sorted rates nudged apart so μ0 < μ1 < μ2 holds strictly."""
    m = np.maximum(np.sort(np.asarray(mu, dtype=float)), RATE_FLOOR)
    for i in range(1, 3):
        if m[i] <= m[i - 1]:
            m[i] = m[i - 1] * (1.0 + JITTER) + RATE_FLOOR
    return RateParams(*m)


def _clip_prob(v: float) -> float:
    return float(np.clip(v, PROB_FLOOR, 1.0 - PROB_FLOOR))


def mixture_probs(model: str, n: int, fit: MixtureFit, hp: Hyperparams):
    """
    φ from the expected label counts m̂_k:
    hypergraph q = m̂1 / C(n,2), p solves 1 − (1 − p)^(n−2) = m̂2 / C(n,2);
    categorical q2 = m̂2 / C(n,2), q1 = m̂1 / (C(n,2) − m̂2).
    """
    n2 = n_pairs(n)
    m1, m2 = float(fit.expected_counts[1]), float(fit.expected_counts[2])
    if model == "hypergraph":
        q = _clip_prob(m1 / n2)
        if n < 3:
            p = hp.xi / (hp.xi + hp.zeta)
        else:
            coverage = min(m2 / n2, 1.0 - PROB_FLOOR)
            p = 1.0 - (1.0 - coverage) ** (1.0 / (n - 2))
        return HypergraphProbs(q, _clip_prob(p))
    q2 = _clip_prob(m2 / n2)
    q1 = _clip_prob(m1 / max(n2 - m2, 1.0))
    return GraphProbs(q1, q2)


def mixture_initial_structure(model: str, x: ObservationMatrix) -> Structure:
    """2-edges (or weak edges) wherever x_ij > 0, nothing else."""
    pairs = [(i, j) for i, j, _ in x.nonzero_pairs()]
    if model == "hypergraph":
        return Hypergraph(x.n, pairs)
    return CategoricalGraph(x.n, pairs)


def conditional_mean_probs(structure: Structure, hp: Hyperparams):
    """Posterior means of φ given the structure; always inside (0, 1)."""
    n2 = n_pairs(structure.n)
    a, b = hp.xi, hp.zeta
    if isinstance(structure, Hypergraph):
        return HypergraphProbs((structure.h1 + a) / (n2 + a + b),
                               (structure.h2 + a) / (n_triplets(structure.n) + a + b))
    return GraphProbs((structure.m1 + a) / (n2 - structure.m2 + a + b),
                      (structure.m2 + a) / (n2 + a + b))


def _ordered_truth(model: str, truth: Structure, mu: RateParams):
    """
    Ground truth expressed in the model's ordering. A categorical truth whose
    rates are not increasing has its labels permuted by rate rank.
    """
    if mu.mu0 <= 0.0:
        mu = RateParams(RATE_FLOOR, mu.mu1, mu.mu2)
    if model == "hypergraph":
        if not isinstance(truth, Hypergraph):
            raise ConfigError("hypergraph ground-truth initialization needs a hypergraph")
        if not mu.satisfies_order(model):
            raise ConfigError(f"ground-truth rates {mu.as_tuple()} violate μ0 < μ1, μ0 < μ2")
        return truth, mu
    labels = labels_of(truth)
    if mu.satisfies_order(model):
        return graph_from_labels(labels), mu
    rank = np.argsort(np.argsort(mu.as_array(), kind="stable"), kind="stable")
    permuted = type(labels)(labels.n, rank[labels.values])
    return graph_from_labels(permuted), _strict_order(mu.as_array())


def build_initial_state(model: str, x: ObservationMatrix, hp: Hyperparams, init_mode: str = "mixture",
                        truth: Optional[Structure] = None, true_mu: Optional[RateParams] = None,
                        rng: Optional[np.random.Generator] = None) -> PosteriorSample:
    if init_mode == "ground_truth":
        if truth is None or true_mu is None:
            raise ConfigError("ground_truth initialization needs a structure and true rates")
        structure, mu = _ordered_truth(model, truth, true_mu)
        probs = conditional_mean_probs(structure, hp)
    elif init_mode == "mixture":
        fit = poisson_mixture_em(x, 3, rng)
        structure = mixture_initial_structure(model, x)
        mu = _strict_order(fit.mu_hat)
        probs = mixture_probs(model, x.n, fit, hp)
    else:
        raise ConfigError(f"unknown init_mode {init_mode!r}")
    lj = log_joint(structure, x, mu, probs, hp)
    ll = log_likelihood(x, labels_of(structure), mu)
    return PosteriorSample(structure, mu, probs, lj, ll)

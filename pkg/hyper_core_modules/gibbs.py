#!/usr/bin/env python3
"""
hyper_core_modules/gibbs.py

Metropolis-Hastings-within-Gibbs driver: conjugate parameter conditionals,
one gibbs iteration (parameters then a sweep of structure proposals),
convergence detection, single chains and multi-chain orchestration.
"""
import logging
import math
import multiprocessing
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from hyper_core_modules.likelihood import (
    SufficientStats,
    log_factorial_sum,
    log_parameter_prior,
)
from hyper_core_modules.mh_kernels import make_kernel
from hyper_core_modules.mixture import build_initial_state
from hyper_core_modules.structures import (
    GraphProbs,
    Hypergraph,
    HypergraphProbs,
    ObservationMatrix,
    RateParams,
    Structure,
    StructureProbs,
    model_of,
    n_pairs,
    n_triplets,
)
from hyper_core_modules.trace import ChainTrace, PosteriorSample
from stat_modules.config import Hyperparams, McmcConfig
from stat_modules.math_core import TruncInterval, chain_seed, make_rng, sample_beta, sample_truncated_gamma

logger = logging.getLogger(__name__)


# ─── Parameter conditionals ───────────────────────────────────────────────────
def _draw_probs(model: str, n: int, c1: int, c2: int, hp: Hyperparams,
                rng: np.random.Generator) -> StructureProbs:
    n2 = n_pairs(n)
    if model == "hypergraph":
        q = sample_beta(c1 + hp.xi, n2 - c1 + hp.zeta, rng)
        p = sample_beta(c2 + hp.xi, n_triplets(n) - c2 + hp.zeta, rng)
        return HypergraphProbs(q, p)
    q1 = sample_beta(c1 + hp.xi, n2 - c1 - c2 + hp.zeta, rng)
    q2 = sample_beta(c2 + hp.xi, n2 - c2 + hp.zeta, rng)
    return GraphProbs(q1, q2)


def resample_structure_probs(s: Structure, hp: Hyperparams, rng: np.random.Generator) -> StructureProbs:
    """
    hypergraph:  q ~ Beta(h1+ξ, C(n,2)−h1+ζ),  p ~ Beta(h2+ξ, C(n,3)−h2+ζ)
    categorical: q1 ~ Beta(m1+ξ, C(n,2)−m1−m2+ζ),  q2 ~ Beta(m2+ξ, C(n,2)−m2+ζ)
    """
    if isinstance(s, Hypergraph):
        return _draw_probs("hypergraph", s.n, s.h1, s.h2, hp, rng)
    return _draw_probs("categorical", s.n, s.m1, s.m2, hp, rng)


def resample_rates(model: str, stats: SufficientStats, current_mu: RateParams, hp: Hyperparams,
                   rng: np.random.Generator, threshold: float = 0.1) -> RateParams:
    """
    Sequential truncated-gamma conditionals μ0, μ1, μ2 with shape X_k + α_k and
    rate L_k + β_k, each bounded by the freshest values of the others.
    categorical: μ0 ∈ (0, μ1), μ1 ∈ (μ0, μ2), μ2 ∈ (μ1, ∞)
    hypergraph:  μ0 ∈ (0, min(μ1, μ2)), μ1 ∈ (μ0, ∞), μ2 ∈ (μ0, ∞)
    """
    if not current_mu.satisfies_order(model):
        raise ValueError(f"current rates {current_mu.as_tuple()} violate the {model} ordering")
    X, L = stats.X, stats.L
    shape = [float(X[k]) + hp.alphas[k] for k in range(3)]
    rate = [float(L[k]) + hp.betas[k] for k in range(3)]
    mu0, mu1, mu2 = current_mu.as_tuple()

    def draw(k, lo, hi):
        return sample_truncated_gamma(shape[k], rate[k], TruncInterval(lo, hi), rng, threshold)

    if model == "categorical":
        mu0 = draw(0, 0.0, mu1)
        mu1 = draw(1, mu0, mu2)
        mu2 = draw(2, mu1, math.inf)
    else:
        mu0 = draw(0, 0.0, min(mu1, mu2))
        mu1 = draw(1, mu0, math.inf)
        mu2 = draw(2, mu0, math.inf)
    return RateParams(mu0, mu1, mu2)


# ─── Gibbs iteration ──────────────────────────────────────────────────────────
class GibbsChain:
    """
    Mutable chain state: a structure kernel plus the current (μ, φ).
    log_joint is tracked incrementally through accepted moves.
    """

    def __init__(self, init: PosteriorSample, x: ObservationMatrix, cfg: McmcConfig, hp: Hyperparams):
        self.model = model_of(init.structure)
        self.x = x
        self.cfg = cfg
        self.hp = hp
        self.mu = init.mu
        self.probs = init.probs
        self.kernel = make_kernel(init.structure, x, init.mu, init.probs, cfg)
        self.sweep = cfg.sweep_size(x.n)
        self._log_fact = log_factorial_sum(x)

    def _counts(self) -> Tuple[int, int]:
        k = self.kernel
        if self.model == "hypergraph":
            return len(k.two_edges), len(k.three_edges)
        return k.m1, k.m2

    def resample_parameters(self, rng: np.random.Generator) -> None:
        c1, c2 = self._counts()
        self.probs = _draw_probs(self.model, self.x.n, c1, c2, self.hp, rng)
        self.mu = resample_rates(self.model, self.kernel.stats(), self.mu, self.hp, rng,
                                 self.cfg.trunc_rejection_threshold)
        self.kernel.set_params(self.mu, self.probs)

    def iteration(self, rng: np.random.Generator,
                  on_proposal: Optional[Callable[[float], None]] = None) -> None:
        self.resample_parameters(rng)
        kernel = self.kernel
        if on_proposal is None:
            for _ in range(self.sweep):
                kernel.step(rng)
        else:
            for _ in range(self.sweep):
                kernel.step(rng)
                on_proposal(self.log_likelihood())

    def log_likelihood(self) -> float:
        return self.kernel.log_likelihood() - self._log_fact

    def log_joint(self) -> float:
        return self.kernel.log_target + log_parameter_prior(self.probs, self.mu, self.hp, self.model)

    def snapshot(self) -> PosteriorSample:
        return PosteriorSample(self.kernel.structure(), self.mu, self.probs,
                               self.log_joint(), self.log_likelihood())


def gibbs_iteration(state: PosteriorSample, x: ObservationMatrix, cfg: McmcConfig, hp: Hyperparams,
                    rng: np.random.Generator) -> PosteriorSample:
    """Resample φ, then μ, then run one sweep of structure proposals."""
    chain = GibbsChain(state, x, cfg, hp)
    chain.iteration(rng)
    return chain.snapshot()


# ─── Convergence ──────────────────────────────────────────────────────────────
def relative_window_change(history: Sequence[float], window: int) -> float:
    """|mean(last W) − mean(previous W)| / |mean(previous W)|."""
    h = np.asarray(history[-2 * window:], dtype=float)
    prev, last = h[:window].mean(), h[window:].mean()
    if prev == 0.0:
        return 0.0 if last == 0.0 else math.inf
    return float(abs(last - prev) / abs(prev))


def check_convergence(trace: Union[ChainTrace, Sequence[float]], cfg: McmcConfig) -> bool:
    history = trace.loglik_history if isinstance(trace, ChainTrace) else trace
    t = len(history)
    if t >= cfg.iter_max:
        return True
    if t < cfg.iter_min or t < 2 * cfg.window_w:
        return False
    return relative_window_change(history, cfg.window_w) < cfg.tol_delta


# ─── Chains ───────────────────────────────────────────────────────────────────
def run_chain(model: str, x: ObservationMatrix, init: PosteriorSample, cfg: McmcConfig, hp: Hyperparams,
              rng: np.random.Generator, seed: Optional[int] = None) -> ChainTrace:
    """
    Iterate until convergence (or I_max), then retain n_samples samples spaced
    sample_stride gibbs iterations apart. After burn-in the history gets one
    entry per retained sample, so its length stays below I_max + sweep +
    n_samples.
    """
    if init.model != model:
        raise ValueError(f"initial state is a {init.model} sample, chain model is {model}")
    chain = GibbsChain(init, x, cfg, hp)
    trace = ChainTrace(model=model, seed=seed)
    history = trace.loglik_history
    per_proposal = cfg.iteration_unit == "proposal" and chain.sweep > 0
    record = history.append if per_proposal else None

    logger.info("chain start: model=%s n=%d seed=%s sweep=%d", model, x.n, seed, chain.sweep)
    iterations = 0
    while True:
        chain.iteration(rng, record)
        iterations += 1
        if not per_proposal:
            history.append(chain.log_likelihood())
        if check_convergence(history, cfg):
            break

    t = len(history)
    if t >= cfg.iter_max and not (t >= max(cfg.iter_min, 2 * cfg.window_w)
                                  and relative_window_change(history, cfg.window_w) < cfg.tol_delta):
        logger.warning("chain seed=%s reached I_max=%d without converging", seed, cfg.iter_max)
    else:
        trace.converged = True
        trace.converged_at = t
        logger.info("chain seed=%s converged at %d (%s units)", seed, t, cfg.iteration_unit)

    for _ in range(cfg.n_samples):
        for _ in range(cfg.sample_stride):
            chain.iteration(rng)
            iterations += 1
        sample = chain.snapshot()
        trace.samples.append(sample)
        history.append(sample.log_likelihood)

    trace.iterations = iterations
    trace.acceptance = {k: list(v) for k, v in chain.kernel.acceptance.items()}
    return trace


def _chain_job(args) -> ChainTrace:
    model, x, init, cfg, hp, seed = args
    return run_chain(model, x, init, cfg, hp, make_rng(seed), seed=seed)


def select_chain(traces: List[ChainTrace]) -> ChainTrace:
    """Chain with the highest mean log-likelihood over its retained samples."""
    return max(traces, key=lambda t: t.mean_sample_log_likelihood())


def run_inference(model: str, x: ObservationMatrix, cfg: McmcConfig, hp: Hyperparams,
                  init_mode: str = "mixture", truth: Optional[Structure] = None,
                  true_mu: Optional[RateParams] = None) -> ChainTrace:
    """
    Run cfg.n_chains chains seeded master_seed + k and keep the best one.
    init_mode "mixture" starts from the Poisson-mixture fit, "ground_truth"
    from `truth` and `true_mu`.
    """
    init = build_initial_state(model, x, hp, init_mode, truth=truth, true_mu=true_mu,
                               rng=make_rng(cfg.master_seed))
    jobs = [(model, x, init, cfg, hp, chain_seed(cfg.master_seed, k)) for k in range(cfg.n_chains)]
    workers = min(cfg.n_workers, cfg.n_chains)
    if workers > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=workers) as pool:
            traces = pool.map(_chain_job, jobs)
    else:
        traces = [_chain_job(job) for job in jobs]

    best = select_chain(traces)
    if not any(t.converged for t in traces):
        logger.warning("no chain converged; returning the best unconverged chain (seed=%s)", best.seed)
    logger.info("selected chain seed=%s mean log-likelihood %.4f", best.seed, best.mean_sample_log_likelihood())
    return best


__all__ = [
    "resample_structure_probs",
    "resample_rates",
    "GibbsChain",
    "gibbs_iteration",
    "relative_window_change",
    "check_convergence",
    "run_chain",
    "select_chain",
    "run_inference",
]

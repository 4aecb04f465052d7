#!/usr/bin/env python3
"""
hyper_core_modules/estimators.py

Posterior summaries (MAP, edge-wise, maximum-marginal), confusion matrices
and the reconstruction diagnostics: ε, label entropy S, posterior-predictive
residuals R_k, E_Δ and the row-normalized confusion matrix.
"""
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from hyper_core_modules.likelihood import generate_observations
from hyper_core_modules.structures import (
    CategoricalGraph,
    Hypergraph,
    LabelMatrix,
    ObservationMatrix,
    RateParams,
    Structure,
    check_same_n,
    labels_of,
    n_pairs,
)
from hyper_core_modules.trace import ChainTrace, PosteriorSample
from stat_modules.errors import InvalidStructureError, UndefinedMetricError
from stat_modules.math_core import entropy

logger = logging.getLogger(__name__)

PERCENTILES = (2.5, 25.0, 75.0, 97.5)
N_PRED = 200


# ─── Estimators ───────────────────────────────────────────────────────────────
def map_estimate(trace: ChainTrace) -> PosteriorSample:
    """Retained sample with the largest log joint."""
    samples = trace.require_samples()
    return max(samples, key=lambda s: s.log_joint)


def edge_frequencies(trace: ChainTrace) -> Dict[str, Counter]:
    """Appearance counts of each edge across retained samples, per edge kind."""
    samples = trace.require_samples()
    if isinstance(samples[0].structure, Hypergraph):
        kinds = {"two_edges": Counter(), "three_edges": Counter()}
    else:
        kinds = {"weak_edges": Counter(), "strong_edges": Counter()}
    for s in samples:
        for name, counter in kinds.items():
            counter.update(getattr(s.structure, name))
    return kinds


def edgewise_estimate(trace: ChainTrace) -> Structure:
    """Edges present in strictly more than half of the retained samples."""
    samples = trace.require_samples()
    first = samples[0].structure
    if any(type(s.structure) is not type(first) for s in samples):
        raise InvalidStructureError("trace mixes hypergraph and categorical samples")
    half = 0.5 * len(samples)
    kept = {name: [e for e, c in counter.items() if c > half]
            for name, counter in edge_frequencies(trace).items()}
    if isinstance(first, Hypergraph):
        return Hypergraph(first.n, kept["two_edges"], kept["three_edges"])
    weak, strong = kept["weak_edges"], kept["strong_edges"]
    return CategoricalGraph(first.n, weak, strong)


def label_marginals(trace: ChainTrace) -> np.ndarray:
    """(C(n,2), 3) array of empirical label frequencies."""
    samples = trace.require_samples()
    n = samples[0].structure.n
    counts = np.zeros((n_pairs(n), 3), dtype=np.int64)
    rows = np.arange(n_pairs(n))
    for s in samples:
        counts[rows, labels_of(s.structure).values] += 1
    return counts / len(samples)


def marginal_label_estimate(trace: ChainTrace, rng: np.random.Generator) -> LabelMatrix:
    """Per-pair argmax of the label marginal; ties broken uniformly at random."""
    freq = label_marginals(trace)
    top = freq == freq.max(axis=1, keepdims=True)
    score = np.where(top, rng.random(freq.shape), -1.0)
    n = trace.samples[0].structure.n
    return LabelMatrix(n, score.argmax(axis=1).astype(np.int8))


# ─── Reporting rules ──────────────────────────────────────────────────────────
def apply_single_type_rule(labels: LabelMatrix) -> LabelMatrix:
    """
    If the only nonzero predicted type is 1, every type-1 prediction becomes
    type 2 (all-weak and all-strong reconstructions are equivalent).
    """
    present = set(np.unique(labels.values).tolist()) - {0}
    if present != {1}:
        return labels
    return LabelMatrix(labels.n, np.where(labels.values == 1, 2, labels.values))


def single_type_rule_fires(labels: LabelMatrix) -> bool:
    return set(np.unique(labels.values).tolist()) - {0} == {1}


def relabel_for_rate_order(labels: LabelMatrix, mu: RateParams) -> LabelMatrix:
    """Swap types 1 and 2 when μ1 > μ2, so a categorical fit under μ1 < μ2 is comparable."""
    if mu.mu1 <= mu.mu2:
        return labels
    swap = np.array([0, 2, 1], dtype=np.int8)
    return LabelMatrix(labels.n, swap[labels.values])


# ─── Confusion matrix & scalar metrics ────────────────────────────────────────
@dataclass(frozen=True)
class ConfusionMatrix:
    """c[r][s]: pairs with true label r predicted as s."""
    c: Tuple[Tuple[int, int, int], ...]

    @classmethod
    def from_array(cls, arr) -> "ConfusionMatrix":
        arr = np.asarray(arr, dtype=np.int64)
        if arr.shape != (3, 3) or (arr < 0).any():
            raise ValueError("confusion matrix must be a non-negative 3x3 array")
        return cls(tuple(tuple(int(v) for v in row) for row in arr))

    def as_array(self) -> np.ndarray:
        return np.array(self.c, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.as_array().sum())


def confusion(true_labels: LabelMatrix, predicted: LabelMatrix) -> ConfusionMatrix:
    check_same_n(true_labels, predicted)
    flat = true_labels.values.astype(np.int64) * 3 + predicted.values.astype(np.int64)
    return ConfusionMatrix.from_array(np.bincount(flat, minlength=9).reshape(3, 3))


def reconstruction_error(c: ConfusionMatrix) -> float:
    """ε = (c10 + c12 + c20 + c21) / Σ_{r∈{1,2}} Σ_s c_rs"""
    a = c.as_array()
    denom = int(a[1:, :].sum())
    if denom == 0:
        raise UndefinedMetricError("ε undefined: no true type-1 or type-2 pairs")
    wrong = int(a[1, 0] + a[1, 2] + a[2, 0] + a[2, 1])
    return wrong / denom


def label_entropy(c: ConfusionMatrix, n: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """
    S = −Σ_k ρ_k log_3 ρ_k, ρ_k the proportion of pairs predicted as type k.
    Returns:
        (S, rho)
    """
    a = c.as_array()
    total = n_pairs(n) if n is not None else int(a.sum())
    if total != int(a.sum()):
        raise ValueError(f"confusion matrix holds {int(a.sum())} pairs, expected {total}")
    rho = a.sum(axis=0) / total
    return float(entropy(rho, base=3)), rho


def normalized_confusion(c: ConfusionMatrix) -> Tuple[np.ndarray, List[bool]]:
    """
    c̃_rs = c_rs / Σ_s c_rs. Rows with no pairs stay zero.
    Returns:
        (3x3 matrix, zero-row flags)
    """
    a = c.as_array().astype(float)
    sums = a.sum(axis=1)
    out = np.divide(a, sums[:, None], out=np.zeros_like(a), where=sums[:, None] > 0)
    return out, [bool(s == 0) for s in sums]


def edge_triangle_fraction(h: Hypergraph, within: str = "hyperedges") -> float:
    """
    E_Δ: share of 2-edges covered by a 3-edge ("hyperedges"), or lying in a
    triangle of the projected interaction graph ("triangles").
    """
    if h.h1 == 0:
        raise UndefinedMetricError("E_Δ undefined for a hypergraph without 2-edges")
    if within == "hyperedges":
        delta = h.delta()
        inside = sum(1 for e in h.two_edges if e in delta)
    elif within == "triangles":
        g = h.to_networkx()
        inside = sum(1 for i, j in h.two_edges if any(True for _ in nx.common_neighbors(g, i, j)))
    else:
        raise ValueError(f"unknown E_Δ variant {within!r}")
    return inside / h.h1


# ─── Posterior-predictive residuals ───────────────────────────────────────────
@dataclass
class ResidualBands:
    """R_k draws summarized by median and percentile bands, k = 0, 1, 2."""
    draws: np.ndarray = field(repr=False)
    median: np.ndarray
    bands: Dict[float, np.ndarray]

    def covers_zero(self, lo: float = 2.5, hi: float = 97.5) -> np.ndarray:
        return (self.bands[lo] <= 0.0) & (self.bands[hi] >= 0.0)

    def to_dict(self) -> dict:
        return {
            "median": self.median.tolist(),
            "percentiles": {str(p): v.tolist() for p, v in self.bands.items()},
        }


def residual_sums(x: ObservationMatrix, x_pred: ObservationMatrix, labels: LabelMatrix) -> np.ndarray:
    """R_k = Σ_{i<j} (x_ij − x̃_ij) δ(k, ℓ_ij)."""
    check_same_n(x, x_pred, labels)
    diff = x.values.astype(float) - x_pred.values.astype(float)
    return np.bincount(labels.values, weights=diff, minlength=3)


def posterior_predictive_residuals(x: ObservationMatrix, trace: ChainTrace, n_pred: int,
                                   rng: np.random.Generator) -> ResidualBands:
    """
    For n_pred draws (S̃, μ̃) taken with replacement from the retained samples,
    generate x̃ from the likelihood and compute R_k under S̃'s labels.
    """
    samples = trace.require_samples()
    labels_cache: Dict[int, LabelMatrix] = {}
    draws = np.zeros((n_pred, 3))
    picks = rng.integers(len(samples), size=n_pred)
    for t, idx in enumerate(picks):
        s = samples[int(idx)]
        labels = labels_cache.get(int(idx))
        if labels is None:
            labels = labels_cache[int(idx)] = labels_of(s.structure)
        x_pred = generate_observations(labels, s.mu, rng)
        draws[t] = residual_sums(x, x_pred, labels)
    bands = {p: np.percentile(draws, p, axis=0) for p in PERCENTILES}
    return ResidualBands(draws=draws, median=np.median(draws, axis=0), bands=bands)


# ─── Report ───────────────────────────────────────────────────────────────────
@dataclass
class MetricsReport:
    epsilon: float
    entropy: float
    rho: List[float]
    residuals: Optional[dict]
    e_delta: Optional[float]
    confusion: List[List[int]]
    normalized_confusion: List[List[float]]
    zero_rows: List[bool]
    single_type_rule: bool = False
    relabeled: bool = False
    # e_delta counts 2-edges covered by a 3-edge; this one counts 2-edges in a projected triangle
    e_delta_triangles: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_labels(true_labels: LabelMatrix, predicted: LabelMatrix, model: str,
                    true_mu: Optional[RateParams] = None, truth: Optional[Structure] = None,
                    residuals: Optional[ResidualBands] = None) -> MetricsReport:
    """
    Metric suite for one prediction. Categorical predictions get the single
    weak-type rule and, when the generating μ1 > μ2, a truth relabeled 1↔2.
    """
    check_same_n(true_labels, predicted)
    fired = relabeled = False
    if model == "categorical":
        fired = single_type_rule_fires(predicted)
        predicted = apply_single_type_rule(predicted)
        if true_mu is not None and true_mu.mu1 > true_mu.mu2:
            true_labels = relabel_for_rate_order(true_labels, true_mu)
            relabeled = True
    c = confusion(true_labels, predicted)
    try:
        eps = reconstruction_error(c)
    except UndefinedMetricError:
        logger.warning("ε undefined for this truth (no interacting pairs)")
        eps = math.nan
    s, rho = label_entropy(c, true_labels.n)
    norm, zero_rows = normalized_confusion(c)
    e_delta = e_delta_triangles = None
    if isinstance(truth, Hypergraph) and truth.h1 > 0:
        e_delta = edge_triangle_fraction(truth)
        e_delta_triangles = edge_triangle_fraction(truth, within="triangles")
    return MetricsReport(
        epsilon=eps,
        entropy=s,
        rho=rho.tolist(),
        residuals=residuals.to_dict() if residuals is not None else None,
        e_delta=e_delta,
        confusion=[list(r) for r in c.c],
        normalized_confusion=norm.tolist(),
        zero_rows=zero_rows,
        single_type_rule=fired,
        relabeled=relabeled,
        e_delta_triangles=e_delta_triangles,
    )


def evaluate_trace(trace: ChainTrace, x: ObservationMatrix, truth: Structure,
                   true_mu: Optional[RateParams], rng: np.random.Generator,
                   n_pred: int = N_PRED) -> MetricsReport:
    """Maximum-marginal labels against the truth plus posterior-predictive residuals."""
    predicted = marginal_label_estimate(trace, rng)
    bands = posterior_predictive_residuals(x, trace, n_pred, rng)
    return evaluate_labels(labels_of(truth), predicted, trace.model, true_mu, truth, bands)

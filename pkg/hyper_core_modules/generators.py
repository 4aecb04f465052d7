#!/usr/bin/env python3
"""
hyper_core_modules/generators.py

Synthetic hypergraphs (prior model, best/worst case, superimposed SBM,
triangle-edge configuration model, β-model) and bipartite data ingestion.
All generators are deterministic given their numpy Generator.
"""
import logging
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Dict, Hashable, Iterable, List, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms import bipartite
from scipy.special import expit

from hyper_core_modules.structures import Hypergraph, n_pairs, pair_arrays
from stat_modules.config import GeneratorSpec
from stat_modules.errors import ConfigError, InvalidStructureError

logger = logging.getLogger(__name__)

DENSE_TRIPLET_LIMIT = 2_000_000
MAX_GROUP_SIZE = 5


def _check_prob(name: str, v: float) -> float:
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1] (got {v})")
    return v


def _all_triplets(n: int) -> np.ndarray:
    if comb(n, 3) > DENSE_TRIPLET_LIMIT:
        raise ValueError(f"n={n} has too many triplets for dense enumeration")
    if n < 3:
        return np.zeros((0, 3), dtype=np.int64)
    return np.fromiter((v for t in combinations(range(n), 3) for v in t),
                       dtype=np.int64, count=3 * comb(n, 3)).reshape(-1, 3)


def _bernoulli_pairs(n: int, prob, rng: np.random.Generator) -> List[Tuple[int, int]]:
    rows, cols = pair_arrays(n)
    keep = rng.random(n_pairs(n)) < prob
    return list(zip(rows[keep].tolist(), cols[keep].tolist()))


def _uniform_triplets(n: int, count: int, rng: np.random.Generator) -> List[Tuple[int, int, int]]:
    """`count` distinct triplets, uniformly at random (sparse regime)."""
    chosen = set()
    while len(chosen) < count:
        t = rng.choice(n, size=3, replace=False)
        chosen.add(tuple(sorted(int(v) for v in t)))
    return sorted(chosen)


# ─── Prior model ──────────────────────────────────────────────────────────────
def random_hypergraph(n: int, p: float, q: float, rng: np.random.Generator) -> Hypergraph:
    """Each pair a 2-edge w.p. q, each triplet a 3-edge w.p. p, independently."""
    _check_prob("p", p)
    _check_prob("q", q)
    two = _bernoulli_pairs(n, q, rng)
    n3 = comb(n, 3)
    if n3 <= DENSE_TRIPLET_LIMIT:
        trip = _all_triplets(n)
        three = [tuple(t) for t in trip[rng.random(n3) < p].tolist()]
    else:
        three = _uniform_triplets(n, int(rng.binomial(n3, p)), rng)
    return Hypergraph(n, two, three)


def best_case_hypergraph(n: int, p: float, q: float, rng: np.random.Generator) -> Hypergraph:
    """
    Prior-model draw with every 2-edge that closes a projected triangle removed.
    2-edges are scanned in canonical order against the current projection.
    """
    h = random_hypergraph(n, p, q, rng)
    g = h.to_networkx()
    delta = h.delta()
    kept = []
    for i, j in sorted(h.two_edges):
        if any(True for _ in nx.common_neighbors(g, i, j)):
            if (i, j) not in delta:
                g.remove_edge(i, j)
            continue
        kept.append((i, j))
    logger.debug("best case: kept %d of %d 2-edges", len(kept), h.h1)
    return Hypergraph(n, kept, h.three_edges)


def worst_case_hypergraph(n_cliques: int = 20, clique_size: int = 5, promote_prob: float = 0.19,
                          rng: np.random.Generator = None, n: int = None) -> Hypergraph:
    """
    Vertex-disjoint cliques of 2-edges; each clique triangle is promoted to a
    3-edge w.p. promote_prob, keeping its 2-edges (they become hidden).
    """
    if clique_size < 3:
        raise ValueError(f"clique_size must be at least 3 (got {clique_size})")
    _check_prob("promote_prob", promote_prob)
    needed = n_cliques * clique_size
    n = needed if n is None else int(n)
    if n < needed:
        raise ValueError(f"{n_cliques} cliques of size {clique_size} need {needed} vertices, n={n}")
    rng = rng if rng is not None else np.random.default_rng(0)
    two, three = [], []
    for c in range(n_cliques):
        members = range(c * clique_size, (c + 1) * clique_size)
        two.extend(combinations(members, 2))
        tri = list(combinations(members, 3))
        promote = rng.random(len(tri)) < promote_prob
        three.extend(t for t, keep in zip(tri, promote) if keep)
    return Hypergraph(n, two, three)


# ─── Superimposed stochastic block model ──────────────────────────────────────
@dataclass(frozen=True)
class SbmParams:
    """
    Community sizes, 2-edge probabilities q[a][b] between communities and
    3-edge probabilities p_in[a] (all three vertices in community a) or p_out.
    """
    sizes: Tuple[int, ...] = (30, 70)
    q: Tuple[Tuple[float, ...], ...] = ((0.05, 0.001), (0.001, 0.02))
    p_in: Tuple[float, ...] = (0.005, 0.0001)
    p_out: float = 0.00001

    def __post_init__(self):
        k = len(self.sizes)
        if any(s <= 0 for s in self.sizes):
            raise ValueError("community sizes must be positive")
        if len(self.q) != k or any(len(row) != k for row in self.q) or len(self.p_in) != k:
            raise ValueError("SBM probabilities must match the number of communities")
        for a in range(k):
            for b in range(k):
                _check_prob(f"q[{a}][{b}]", self.q[a][b])
                if self.q[a][b] != self.q[b][a]:
                    raise ValueError("2-edge block matrix must be symmetric")
            _check_prob(f"p_in[{a}]", self.p_in[a])
        _check_prob("p_out", self.p_out)

    @property
    def n(self) -> int:
        return int(sum(self.sizes))


def hypergraph_sbm(params: SbmParams, rng: np.random.Generator) -> Hypergraph:
    n = params.n
    seed = int(rng.integers(2 ** 32))
    g = nx.stochastic_block_model(list(params.sizes), [list(r) for r in params.q], seed=seed)
    two = list(g.edges())
    block = np.repeat(np.arange(len(params.sizes)), params.sizes)
    trip = _all_triplets(n)
    prob = np.full(len(trip), params.p_out)
    if len(trip):
        b = block[trip]
        same = (b[:, 0] == b[:, 1]) & (b[:, 1] == b[:, 2])
        prob[same] = np.asarray(params.p_in)[b[same, 0]]
    three = [tuple(t) for t in trip[rng.random(len(trip)) < prob].tolist()]
    return Hypergraph(n, two, three)


# ─── Triangle-edge configuration model ────────────────────────────────────────
def _geometric_degrees(n: int, mean: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-based geometric degrees with the given mean (success probability 1/(mean+1))."""
    if mean <= 0:
        raise ValueError(f"geometric degree mean must be positive (got {mean})")
    return rng.geometric(1.0 / (mean + 1.0), size=n) - 1


def _fix_divisibility(deg: np.ndarray, k: int, mean: float, rng: np.random.Generator) -> np.ndarray:
    """Resample one uniformly chosen vertex until the stub sum is divisible by k."""
    deg = deg.copy()
    while deg.sum() % k:
        v = int(rng.integers(len(deg)))
        deg[v] = rng.geometric(1.0 / (mean + 1.0)) - 1
    return deg


def triangle_edge_cm(n: int, mean2: float = 2.0, mean3: float = 3.0,
                     rng: np.random.Generator = None) -> Hypergraph:
    """
    Erased configuration model with independent 2-edge and 3-edge stub counts.
    Self-loops, repeated vertices and duplicate hyperedges are discarded.
    """
    if n < 3:
        raise ValueError(f"triangle-edge configuration model needs n >= 3 (got {n})")
    rng = rng if rng is not None else np.random.default_rng(0)
    d2 = _fix_divisibility(_geometric_degrees(n, mean2, rng), 2, mean2, rng)
    d3 = _fix_divisibility(_geometric_degrees(n, mean3, rng), 3, mean3, rng)

    stubs2 = np.repeat(np.arange(n), d2)
    rng.shuffle(stubs2)
    two = set()
    for i, j in stubs2.reshape(-1, 2).tolist():
        if i != j:
            two.add((min(i, j), max(i, j)))

    stubs3 = np.repeat(np.arange(n), d3)
    rng.shuffle(stubs3)
    three = set()
    for t in stubs3.reshape(-1, 3).tolist():
        if len(set(t)) == 3:
            three.add(tuple(sorted(t)))
    erased = (len(stubs2) // 2 - len(two)) + (len(stubs3) // 3 - len(three))
    if erased:
        logger.debug("configuration model erased %d degenerate or duplicate hyperedges", erased)
    return Hypergraph(n, two, three)


# ─── β-model ──────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class BetaModelParams:
    """Normal vertex propensities for the 2-edge and 3-edge layers."""
    mean2: float = -4.5
    sd2: float = 2.5
    mean3: float = -5.0
    sd3: float = 2.0

    def __post_init__(self):
        if self.sd2 <= 0 or self.sd3 <= 0:
            raise ValueError("propensity standard deviations must be positive")


def beta_model_hypergraph(n: int, params: BetaModelParams, rng: np.random.Generator) -> Hypergraph:
    """Pair (i,j) w.p. logistic(b_i + b_j); triplet w.p. logistic(b'_i + b'_j + b'_k)."""
    b2 = rng.normal(params.mean2, params.sd2, size=n)
    b3 = rng.normal(params.mean3, params.sd3, size=n)
    rows, cols = pair_arrays(n)
    pair_prob = expit(b2[rows] + b2[cols])
    keep = rng.random(len(rows)) < pair_prob
    two = list(zip(rows[keep].tolist(), cols[keep].tolist()))
    trip = _all_triplets(n)
    trip_prob = expit(b3[trip].sum(axis=1)) if len(trip) else np.zeros(0)
    three = [tuple(t) for t in trip[rng.random(len(trip)) < trip_prob].tolist()]
    return Hypergraph(n, two, three)


# ─── Bipartite ingestion ──────────────────────────────────────────────────────
def bipartite_to_hypergraph(records: Iterable[Tuple[Hashable, Hashable]],
                            max_group_size: int = MAX_GROUP_SIZE) -> Tuple[Hypergraph, Dict[Hashable, int]]:
    """
    Groups of size 2 become 2-edges, size 3 a 3-edge, sizes 4..max_group_size
    every constituent 3-edge; larger groups are dropped. Entities left without
    a hyperedge are removed and the rest re-indexed densely.
    Returns:
        (hypergraph, entity → vertex mapping)
    """
    b = nx.Graph()
    groups = []
    for entity, group in records:
        if entity is None or group is None:
            raise InvalidStructureError(f"malformed bipartite record ({entity!r}, {group!r})")
        ek, gk = ("entity", entity), ("group", group)
        if gk not in b:
            groups.append(gk)
        b.add_node(ek, bipartite=0)
        b.add_node(gk, bipartite=1)
        b.add_edge(ek, gk)
    if groups and not bipartite.is_bipartite(b):
        raise InvalidStructureError("records do not form a bipartite graph")

    pairs, triplets, dropped = set(), set(), 0
    for gk in groups:
        members = sorted((e[1] for e in b[gk]), key=str)
        size = len(members)
        if size > max_group_size:
            dropped += 1
        elif size == 2:
            pairs.add(tuple(members))
        elif size >= 3:
            triplets.update(combinations(members, 3))
    if dropped:
        logger.info("dropped %d groups larger than %d", dropped, max_group_size)

    entities = sorted({v for e in pairs for v in e} | {v for t in triplets for v in t}, key=str)
    mapping = {e: k for k, e in enumerate(entities)}
    two = [(mapping[a], mapping[c]) for a, c in pairs]
    three = [tuple(mapping[v] for v in t) for t in triplets]
    return Hypergraph(max(len(entities), 1), two, three), mapping


# ─── Dispatch ─────────────────────────────────────────────────────────────────
GENERATOR_KINDS = ("prior", "sbm", "cm", "beta", "best", "worst")


def generate_structure(spec: GeneratorSpec, rng: np.random.Generator = None) -> Hypergraph:
    """Build the hypergraph described by a GeneratorSpec."""
    rng = rng if rng is not None else np.random.Generator(np.random.PCG64(spec.seed))
    p = dict(spec.params)
    try:
        if spec.kind == "prior":
            return random_hypergraph(int(p["n"]), float(p["p"]), float(p["q"]), rng)
        if spec.kind == "best":
            return best_case_hypergraph(int(p["n"]), float(p["p"]), float(p["q"]), rng)
        if spec.kind == "worst":
            return worst_case_hypergraph(int(p.get("n_cliques", 20)), int(p.get("clique_size", 5)),
                                         float(p.get("promote_prob", 0.19)), rng, p.get("n"))
        if spec.kind == "sbm":
            sbm = SbmParams(**{k: _as_tuple(v) for k, v in p.items()})
            return hypergraph_sbm(sbm, rng)
        if spec.kind == "cm":
            return triangle_edge_cm(int(p.get("n", 100)), float(p.get("mean2", 2.0)),
                                    float(p.get("mean3", 3.0)), rng)
        if spec.kind == "beta":
            params = BetaModelParams(**{k: float(v) for k, v in p.items() if k != "n"})
            return beta_model_hypergraph(int(p.get("n", 100)), params, rng)
    except KeyError as e:
        raise ConfigError(f"generator {spec.kind!r} needs parameter {e.args[0]!r}") from e
    except TypeError as e:
        raise ConfigError(f"generator {spec.kind!r}: {e}") from e
    raise ConfigError(f"unknown generator kind {spec.kind!r}")


def _as_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(_as_tuple(x) for x in v)
    return v

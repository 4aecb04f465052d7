#!/usr/bin/env python3
"""
hyper_core_modules/structures.py

Latent structures (hypergraph with 2-/3-edges, graph with weak/strong edges),
pairwise matrices, rate/probability parameters and the label projection.

Pairs and triplets are canonical sorted tuples. Pairwise matrices store one
entry per unordered pair, in row-major (i < j) order.
"""
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Dict, FrozenSet, Iterable, Iterator, NamedTuple, Tuple, Union

import networkx as nx
import numpy as np

from stat_modules.errors import DimensionMismatchError, InvalidStructureError

Pair    = Tuple[int, int]
Triplet = Tuple[int, int, int]


# ─── Index helpers ────────────────────────────────────────────────────────────
def n_pairs(n: int) -> int:
    return comb(n, 2)


def n_triplets(n: int) -> int:
    return comb(n, 3)


def pair_index(n: int, i: int, j: int) -> int:
    """Position of unordered pair (i, j) in the row-major upper triangle."""
    if i > j:
        i, j = j, i
    return i * (2 * n - i - 1) // 2 + (j - i - 1)


def pair_arrays(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column index of every unordered pair, aligned with pair_index."""
    return np.triu_indices(n, 1)


def iter_pairs(n: int) -> Iterator[Pair]:
    return combinations(range(n), 2)


def canonical_pair(i: int, j: int) -> Pair:
    i, j = int(i), int(j)
    if i == j:
        raise InvalidStructureError(f"degenerate pair ({i}, {j})")
    return (i, j) if i < j else (j, i)


def canonical_triplet(i: int, j: int, k: int) -> Triplet:
    t = tuple(sorted((int(i), int(j), int(k))))
    if t[0] == t[1] or t[1] == t[2]:
        raise InvalidStructureError(f"degenerate triplet {tuple((i, j, k))}")
    return t


def _canonical_set(items, n: int, size: int, what: str) -> FrozenSet[tuple]:
    out = set()
    count = 0
    for item in items:
        item = tuple(item)
        if len(item) != size:
            raise InvalidStructureError(f"{what} {item} must have {size} vertices")
        canon = canonical_pair(*item) if size == 2 else canonical_triplet(*item)
        if canon[0] < 0 or canon[-1] >= n:
            raise InvalidStructureError(f"{what} {item} out of range for n={n}")
        out.add(canon)
        count += 1
    if len(out) != count:
        raise InvalidStructureError(f"duplicate {what}s")
    return frozenset(out)


# ─── Latent structures ────────────────────────────────────────────────────────
@dataclass(frozen=True)
class Hypergraph:
    """
    Simple hypergraph on vertices 0..n-1 with 2-edges E and 3-edges T.
    """
    n: int
    two_edges: FrozenSet[Pair] = field(default_factory=frozenset)
    three_edges: FrozenSet[Triplet] = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidStructureError(f"vertex count must be positive (got {self.n})")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "two_edges", _canonical_set(self.two_edges, self.n, 2, "2-edge"))
        object.__setattr__(self, "three_edges", _canonical_set(self.three_edges, self.n, 3, "3-edge"))

    @property
    def h1(self) -> int:
        return len(self.two_edges)

    @property
    def h2(self) -> int:
        return len(self.three_edges)

    def delta(self) -> FrozenSet[Pair]:
        """Pairs covered by at least one 3-edge."""
        covered = set()
        for i, j, k in self.three_edges:
            covered.update(((i, j), (i, k), (j, k)))
        return frozenset(covered)

    def to_networkx(self) -> nx.Graph:
        """Projected interaction graph: an edge per nonzero label, carrying `label`."""
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        for i, j in self.two_edges:
            g.add_edge(i, j, label=1)
        for pair in self.delta():
            g.add_edge(*pair, label=2)
        return g


@dataclass(frozen=True)
class CategoricalGraph:
    """Graph with disjoint weak (E1) and strong (E2) edge sets."""
    n: int
    weak_edges: FrozenSet[Pair] = field(default_factory=frozenset)
    strong_edges: FrozenSet[Pair] = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidStructureError(f"vertex count must be positive (got {self.n})")
        object.__setattr__(self, "n", int(self.n))
        weak = _canonical_set(self.weak_edges, self.n, 2, "weak edge")
        strong = _canonical_set(self.strong_edges, self.n, 2, "strong edge")
        clash = weak & strong
        if clash:
            raise InvalidStructureError(f"pairs both weak and strong: {sorted(clash)[:5]}")
        object.__setattr__(self, "weak_edges", weak)
        object.__setattr__(self, "strong_edges", strong)

    @property
    def m1(self) -> int:
        return len(self.weak_edges)

    @property
    def m2(self) -> int:
        return len(self.strong_edges)


Structure = Union[Hypergraph, CategoricalGraph]


# ─── Pairwise matrices ────────────────────────────────────────────────────────
class _PairMatrix:
    """Symmetric matrix stored once per unordered pair; read-only after construction."""
    dtype = np.int64

    def __init__(self, n: int, values):
        n = int(n)
        if n < 1:
            raise InvalidStructureError(f"vertex count must be positive (got {n})")
        arr = np.array(values, dtype=self.dtype).reshape(-1)
        if arr.shape[0] != n_pairs(n):
            raise DimensionMismatchError(
                f"{type(self).__name__} for n={n} needs {n_pairs(n)} entries, got {arr.shape[0]}")
        arr.setflags(write=False)
        self.n = n
        self.values = arr

    def get(self, i: int, j: int) -> int:
        if i == j:
            raise InvalidStructureError("diagonal entries are undefined")
        return int(self.values[pair_index(self.n, i, j)])

    def as_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=self.dtype)
        rows, cols = pair_arrays(self.n)
        out[rows, cols] = self.values
        out[cols, rows] = self.values
        return out

    def __eq__(self, other):
        return (type(self) is type(other) and self.n == other.n
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((type(self).__name__, self.n, self.values.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class ObservationMatrix(_PairMatrix):
    """Non-negative integer counts x_ij, diagonal absent."""

    def __init__(self, n: int, values):
        super().__init__(n, values)
        if self.values.size and int(self.values.min()) < 0:
            raise InvalidStructureError("observation counts must be non-negative")

    @classmethod
    def zeros(cls, n: int) -> "ObservationMatrix":
        return cls(n, np.zeros(n_pairs(n), dtype=np.int64))

    @classmethod
    def from_pairs(cls, n: int, counts: Dict[Pair, int]) -> "ObservationMatrix":
        vals = np.zeros(n_pairs(n), dtype=np.int64)
        for (i, j), x in counts.items():
            i, j = canonical_pair(i, j)
            if j >= n:
                raise InvalidStructureError(f"pair ({i}, {j}) out of range for n={n}")
            vals[pair_index(n, i, j)] = int(x)
        return cls(n, vals)

    @classmethod
    def from_dense(cls, dense) -> "ObservationMatrix":
        dense = np.asarray(dense)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {dense.shape}")
        if not np.array_equal(dense, dense.T):
            raise InvalidStructureError("observation matrix must be symmetric")
        rows, cols = pair_arrays(dense.shape[0])
        return cls(dense.shape[0], dense[rows, cols])

    @property
    def total(self) -> int:
        return int(self.values.sum())

    def nonzero_pairs(self) -> Iterator[Tuple[int, int, int]]:
        rows, cols = pair_arrays(self.n)
        for idx in np.flatnonzero(self.values):
            yield int(rows[idx]), int(cols[idx]), int(self.values[idx])


class LabelMatrix(_PairMatrix):
    """Interaction type ℓ_ij ∈ {0, 1, 2} for every unordered pair."""
    dtype = np.int8

    def __init__(self, n: int, values):
        super().__init__(n, values)
        if self.values.size and (int(self.values.min()) < 0 or int(self.values.max()) > 2):
            raise InvalidStructureError("labels must lie in {0, 1, 2}")

    def type_counts(self) -> np.ndarray:
        """L_k for k = 0, 1, 2."""
        return np.bincount(self.values, minlength=3).astype(np.int64)

    def pairs_with(self, k: int) -> FrozenSet[Pair]:
        rows, cols = pair_arrays(self.n)
        idx = np.flatnonzero(self.values == k)
        return frozenset((int(rows[t]), int(cols[t])) for t in idx)


def check_same_n(*objs) -> int:
    ns = {o.n for o in objs}
    if len(ns) != 1:
        raise DimensionMismatchError(f"vertex counts differ: {sorted(ns)}")
    return ns.pop()


# ─── Parameters ───────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class RateParams:
    """Poisson means (expected counts per pair) for labels 0, 1, 2."""
    mu0: float
    mu1: float
    mu2: float

    def __post_init__(self):
        for name in ("mu0", "mu1", "mu2"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative (got {v})")
            object.__setattr__(self, name, v)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.mu0, self.mu1, self.mu2)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    def satisfies_order(self, model: str) -> bool:
        """categorical: μ0 < μ1 < μ2; hypergraph: μ0 < μ1 and μ0 < μ2."""
        if model == "categorical":
            return self.mu0 < self.mu1 < self.mu2
        return self.mu0 < self.mu1 and self.mu0 < self.mu2


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 < value < 1.0):
        raise ValueError(f"{name} must lie in (0, 1) (got {value})")
    return value


@dataclass(frozen=True)
class HypergraphProbs:
    """φ_H: 2-edge probability q, 3-edge probability p."""
    q: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "q", _check_prob("q", self.q))
        object.__setattr__(self, "p", _check_prob("p", self.p))


@dataclass(frozen=True)
class GraphProbs:
    """φ_G: weak-edge probability q1, strong-edge probability q2."""
    q1: float
    q2: float

    def __post_init__(self):
        object.__setattr__(self, "q1", _check_prob("q1", self.q1))
        object.__setattr__(self, "q2", _check_prob("q2", self.q2))


StructureProbs = Union[HypergraphProbs, GraphProbs]


def model_of(structure: Structure) -> str:
    return "hypergraph" if isinstance(structure, Hypergraph) else "categorical"


# ─── Projection ───────────────────────────────────────────────────────────────
def project_labels(h: Hypergraph) -> LabelMatrix:
    """ℓ_ij = 2 on Δ, 1 on E \\ Δ, 0 elsewhere."""
    vals = np.zeros(n_pairs(h.n), dtype=np.int8)
    for i, j in h.two_edges:
        vals[pair_index(h.n, i, j)] = 1
    for i, j in h.delta():
        vals[pair_index(h.n, i, j)] = 2
    return LabelMatrix(h.n, vals)


def graph_labels(g: CategoricalGraph) -> LabelMatrix:
    """ℓ_ij = 2 on E2, 1 on E1, 0 elsewhere."""
    vals = np.zeros(n_pairs(g.n), dtype=np.int8)
    for i, j in g.weak_edges:
        vals[pair_index(g.n, i, j)] = 1
    for i, j in g.strong_edges:
        vals[pair_index(g.n, i, j)] = 2
    return LabelMatrix(g.n, vals)


def labels_of(structure: Structure) -> LabelMatrix:
    if isinstance(structure, Hypergraph):
        return project_labels(structure)
    return graph_labels(structure)


def graph_from_labels(labels: LabelMatrix) -> CategoricalGraph:
    """Categorical graph whose weak/strong edges are the type-1/type-2 pairs."""
    return CategoricalGraph(labels.n, labels.pairs_with(1), labels.pairs_with(2))


class HiddenEdgeSets(NamedTuple):
    existing: FrozenSet[Pair]   # C0 = E ∩ Δ
    absent: FrozenSet[Pair]     # C1 = Δ \ E


def hidden_edge_sets(h: Hypergraph) -> HiddenEdgeSets:
    delta = h.delta()
    return HiddenEdgeSets(h.two_edges & delta, delta - h.two_edges)

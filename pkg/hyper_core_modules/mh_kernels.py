#!/usr/bin/env python3
"""
hyper_core_modules/mh_kernels.py

Metropolis-Hastings structure kernels for the categorical-edge graph and the
hypergraph posteriors, with θ = (μ, φ) held fixed between parameter updates.

Each kernel owns a private mutable copy of the structure plus incremental
bookkeeping (labels, sufficient statistics, Δ cover counts, hidden-edge sets),
so a proposal costs O(1) in the number of pairs.
"""
import bisect
import logging
import math
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Tuple

import numpy as np
from scipy.special import gammaln

from hyper_core_modules.likelihood import SufficientStats
from hyper_core_modules.structures import (
    CategoricalGraph,
    GraphProbs,
    Hypergraph,
    HypergraphProbs,
    LabelMatrix,
    ObservationMatrix,
    RateParams,
    check_same_n,
    n_pairs,
    n_triplets,
    pair_arrays,
    pair_index,
)
from stat_modules.config import McmcConfig

logger = logging.getLogger(__name__)

# Move classes
INCREMENT   = "increment"
DECREMENT   = "decrement"
ADD_2EDGE   = "add_2edge"
REMOVE_2EDGE = "remove_2edge"
ADD_3EDGE   = "add_3edge"
REMOVE_3EDGE = "remove_3edge"
ADD_HIDDEN  = "add_hidden"
REMOVE_HIDDEN = "remove_hidden"

HYPERGRAPH_MOVES = (ADD_2EDGE, REMOVE_2EDGE, ADD_3EDGE, REMOVE_3EDGE, ADD_HIDDEN, REMOVE_HIDDEN)
GRAPH_MOVES = (INCREMENT, DECREMENT)

_REVERSE = {
    INCREMENT: DECREMENT, DECREMENT: INCREMENT,
    ADD_2EDGE: REMOVE_2EDGE, REMOVE_2EDGE: ADD_2EDGE,
    ADD_3EDGE: REMOVE_3EDGE, REMOVE_3EDGE: ADD_3EDGE,
    ADD_HIDDEN: REMOVE_HIDDEN, REMOVE_HIDDEN: ADD_HIDDEN,
}

WEIGHTED_PICK_TRIES = 32


@dataclass(frozen=True)
class Move:
    """
    A proposed structure change.
    target: pair index for label / 2-edge moves, vertex triplet for 3-edge
    moves, tuple of pair indices for hidden-edge block moves.
    void: proposal the kernel rejects without evaluation (degenerate or
    already-present triplet).
    """
    kind: str
    target: tuple
    void: bool = False


class IndexedSet:
    """Set with O(1) insert, remove and uniform random pick."""

    def __init__(self, items=()):
        self._items: List[Hashable] = []
        self._pos: Dict[Hashable, int] = {}
        for it in items:
            self.add(it)

    def add(self, item):
        if item in self._pos:
            return
        self._pos[item] = len(self._items)
        self._items.append(item)

    def remove(self, item):
        idx = self._pos.pop(item)
        last = self._items.pop()
        if idx < len(self._items):
            self._items[idx] = last
            self._pos[last] = idx

    def pick(self, rng: np.random.Generator):
        return self._items[int(rng.integers(len(self._items)))]

    def sample(self, m: int, rng: np.random.Generator) -> tuple:
        idx = rng.choice(len(self._items), size=m, replace=False)
        return tuple(self._items[int(i)] for i in idx)

    def __contains__(self, item):
        return item in self._pos

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


# ─── Truncated geometric block size ───────────────────────────────────────────
def sample_block_size(size: int, chi: float, rng: np.random.Generator) -> int:
    """m ∈ [2, size] with P(m) ∝ (1 - χ)^(m-2) χ."""
    support = size - 1
    if support < 1:
        raise ValueError(f"block moves need at least 2 candidates (got {size})")
    if support == 1:
        return 2
    norm = -math.expm1(support * math.log1p(-chi))
    u = float(rng.random())
    t = math.floor(math.log1p(-u * norm) / math.log1p(-chi))
    return 2 + min(max(t, 0), support - 1)


def log_block_probability(m: int, size: int, chi: float) -> float:
    """
    log P(e | C, χ) for a block e of m hidden edges drawn from C:
    truncated geometric size on [2, |C|] times a uniform m-subset.
    """
    if m < 2 or m > size:
        return -math.inf
    log_size = (m - 2) * math.log1p(-chi) + math.log(chi) - math.log(-math.expm1((size - 1) * math.log1p(-chi)))
    log_subset = gammaln(size + 1) - gammaln(m + 1) - gammaln(size - m + 1)
    return float(log_size - log_subset)


def _split(eta: float, can_add: bool, can_remove: bool) -> Tuple[float, float]:
    """Direction probabilities; one-sided boundaries force the feasible direction."""
    if can_add and can_remove:
        return eta, 1.0 - eta
    if can_add:
        return 1.0, 0.0
    if can_remove:
        return 0.0, 1.0
    return 0.0, 0.0


def _log(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


# ─── Shared machinery ─────────────────────────────────────────────────────────
class _StructureKernel:
    """Pair bookkeeping, weighted pair picks, sufficient statistics and MH loop."""
    moves: Tuple[str, ...] = ()

    def __init__(self, x: ObservationMatrix, mu: RateParams, probs, cfg: McmcConfig):
        self.n = x.n
        self.cfg = cfg
        self.x: List[int] = [int(v) for v in x.values]
        rows, cols = pair_arrays(self.n)
        self.rows: List[int] = rows.tolist()
        self.cols: List[int] = cols.tolist()
        self.n2 = n_pairs(self.n)
        weights = x.values.astype(float) + 1.0
        self._pair_weights = weights
        self._pair_cum: List[float] = np.cumsum(weights).tolist()
        self.total_weight = float(self._pair_cum[-1]) if self._pair_cum else 0.0
        self.X = [0, 0, 0]
        self.L = [0, 0, 0]
        self.acceptance: Dict[str, List[int]] = {m: [0, 0] for m in self.moves}
        self.log_target = 0.0
        self.mu = mu
        self.probs = probs

    # parameters
    def set_params(self, mu: RateParams, probs) -> None:
        self.mu = mu
        self.probs = probs
        self._log_mu = [_log(m) for m in mu.as_tuple()]
        self.log_target = self.log_likelihood() + self.log_structure_prior()

    # likelihood pieces
    def stats(self) -> SufficientStats:
        return SufficientStats(np.array(self.X, dtype=np.int64), np.array(self.L, dtype=np.int64))

    def log_likelihood(self) -> float:
        """Σ_k X_k log μ_k − L_k μ_k (constant Σ log x! excluded)."""
        total = 0.0
        for k, m in enumerate(self.mu.as_tuple()):
            if self.X[k]:
                total += self.X[k] * self._log_mu[k]
            total -= self.L[k] * m
        return total

    def _label_delta(self, p: int, old: int, new: int) -> float:
        mu = self.mu.as_tuple()
        xp = self.x[p]
        d = -(mu[new] - mu[old])
        if xp:
            d += xp * (self._log_mu[new] - self._log_mu[old])
        return d

    def _relabel(self, p: int, old: int, new: int) -> None:
        xp = self.x[p]
        self.X[old] -= xp
        self.X[new] += xp
        self.L[old] -= 1
        self.L[new] += 1

    def _pick_weighted_pair(self, eligible, eligible_mask, rng: np.random.Generator) -> int:
        """Pair index drawn ∝ x_ij + 1 among pairs where eligible(p) holds."""
        for _ in range(WEIGHTED_PICK_TRIES):
            u = float(rng.random()) * self.total_weight
            p = min(bisect.bisect_right(self._pair_cum, u), self.n2 - 1)
            if eligible(p):
                return p
        w = self._pair_weights * eligible_mask()
        cum = np.cumsum(w)
        u = float(rng.random()) * cum[-1]
        return int(min(np.searchsorted(cum, u, side="right"), self.n2 - 1))

    # MH loop
    def class_probabilities(self) -> Dict[str, float]:
        raise NotImplementedError

    def propose(self, rng: np.random.Generator) -> Optional[Move]:
        raise NotImplementedError

    def evaluate(self, move: Move) -> Tuple[float, float]:
        raise NotImplementedError

    def apply(self, move: Move) -> None:
        raise NotImplementedError

    def _choose_class(self, rng: np.random.Generator) -> Optional[str]:
        probs = self.class_probabilities()
        u = float(rng.random())
        acc = 0.0
        chosen = None
        for kind in self.moves:
            w = probs.get(kind, 0.0)
            if w <= 0:
                continue
            chosen = kind
            acc += w
            if u < acc:
                break
        return chosen

    def step(self, rng: np.random.Generator) -> bool:
        """One proposal plus accept/reject. Returns True when accepted."""
        move = self.propose(rng)
        if move is None:
            return False
        counter = self.acceptance[move.kind]
        counter[0] += 1
        if move.void:
            return False
        delta, log_q = self.evaluate(move)
        log_alpha = delta + log_q
        if log_alpha >= 0 or math.log(float(rng.random()) + 1e-300) < log_alpha:
            self.apply(move)
            self.log_target += delta
            counter[1] += 1
            return True
        return False

    def acceptance_rates(self) -> Dict[str, float]:
        return {k: (a / p if p else 0.0) for k, (p, a) in self.acceptance.items()}


# ─── Categorical-edge graph ───────────────────────────────────────────────────
class GraphKernel(_StructureKernel):
    """
    Increment/decrement label moves on a categorical-edge graph.
    Increments pick a pair with ℓ < 2 ∝ x_ij + 1; decrements pick a pair with
    ℓ > 0 uniformly.
    """
    moves = GRAPH_MOVES

    def __init__(self, g: CategoricalGraph, x: ObservationMatrix, mu: RateParams,
                 probs: GraphProbs, cfg: McmcConfig):
        check_same_n(g, x)
        super().__init__(x, mu, probs, cfg)
        self.labels: List[int] = [0] * self.n2
        self.nonzero = IndexedSet()
        self.L[0] = self.n2
        self.X[0] = sum(self.x)
        self.m1 = 0
        self.m2 = 0
        self.open_weight = self.total_weight     # Σ (x+1) over ℓ < 2
        for (i, j) in g.weak_edges:
            self._set_label(pair_index(self.n, i, j), 1)
        for (i, j) in g.strong_edges:
            self._set_label(pair_index(self.n, i, j), 2)
        self.set_params(mu, probs)

    def _set_label(self, p: int, new: int) -> None:
        old = self.labels[p]
        if old == new:
            return
        self._relabel(p, old, new)
        self.labels[p] = new
        w = self.x[p] + 1.0
        if old == 2:
            self.open_weight += w
        if new == 2:
            self.open_weight -= w
        self.m1 += (new == 1) - (old == 1)
        self.m2 += (new == 2) - (old == 2)
        if old == 0:
            self.nonzero.add(p)
        elif new == 0:
            self.nonzero.remove(p)

    def _log_prior_counts(self, m1: int, m2: int) -> float:
        q1, q2 = self.probs.q1, self.probs.q2
        return (m2 * math.log(q2) + (self.n2 - m2) * math.log1p(-q2)
                + m1 * math.log(q1) + (self.n2 - m1 - m2) * math.log1p(-q1))

    def log_structure_prior(self) -> float:
        return self._log_prior_counts(self.m1, self.m2)

    def _directions(self, m1: int, m2: int) -> Tuple[float, float]:
        return _split(self.cfg.eta, m2 < self.n2, m1 + m2 > 0)

    def class_probabilities(self) -> Dict[str, float]:
        inc, dec = self._directions(self.m1, self.m2)
        return {INCREMENT: inc, DECREMENT: dec}

    def propose(self, rng: np.random.Generator) -> Optional[Move]:
        kind = self._choose_class(rng)
        if kind is None:
            return None
        if kind == INCREMENT:
            labels = self.labels
            p = self._pick_weighted_pair(
                lambda q: labels[q] < 2,
                lambda: (np.asarray(labels) < 2).astype(float),
                rng,
            )
        else:
            p = self.nonzero.pick(rng)
        return Move(kind, (p,))

    def evaluate(self, move: Move) -> Tuple[float, float]:
        """
        Returns:
            (change in log target, log Q(G|G*) − log Q(G*|G))
        """
        p = move.target[0]
        old = self.labels[p]
        new = old + 1 if move.kind == INCREMENT else old - 1
        if not 0 <= new <= 2:
            raise ValueError(f"{move.kind} impossible on a pair with label {old}")
        m1, m2 = self.m1, self.m2
        m1n = m1 + (new == 1) - (old == 1)
        m2n = m2 + (new == 2) - (old == 2)
        delta = self._label_delta(p, old, new) + self._log_prior_counts(m1n, m2n) - self._log_prior_counts(m1, m2)

        w = self.x[p] + 1.0
        inc, dec = self._directions(m1, m2)
        inc_n, dec_n = self._directions(m1n, m2n)
        if move.kind == INCREMENT:
            open_after = self.open_weight - (w if new == 2 else 0.0)
            log_fwd = _log(inc) + math.log(w) - math.log(self.open_weight)
            log_bwd = _log(dec_n) - math.log(m1n + m2n)
        else:
            open_after = self.open_weight + (w if old == 2 else 0.0)
            log_fwd = _log(dec) - math.log(m1 + m2)
            log_bwd = _log(inc_n) + math.log(w) - math.log(open_after)
        return delta, log_bwd - log_fwd

    def apply(self, move: Move) -> None:
        p = move.target[0]
        step = 1 if move.kind == INCREMENT else -1
        self._set_label(p, self.labels[p] + step)

    def label_matrix(self) -> LabelMatrix:
        return LabelMatrix(self.n, np.array(self.labels, dtype=np.int8))

    def structure(self) -> CategoricalGraph:
        weak, strong = [], []
        for p in self.nonzero:
            (weak if self.labels[p] == 1 else strong).append((self.rows[p], self.cols[p]))
        return CategoricalGraph(self.n, weak, strong)


# ─── Hypergraph ───────────────────────────────────────────────────────────────
class HypergraphKernel(_StructureKernel):
    """
    Six-move kernel on hypergraphs: add/remove a 2-edge, add/remove a 3-edge,
    add/remove a block of hidden 2-edges.

    Class probabilities: ν2 and ν3 split into add/remove by η (forced at the
    boundaries); hidden blocks get 1 − ν2 − ν3. Infeasible hidden moves are
    redrawn, so every class probability is renormalized over the classes
    feasible in the current state, and the Hastings ratio uses each state's
    own renormalized value.
    """
    moves = HYPERGRAPH_MOVES

    def __init__(self, h: Hypergraph, x: ObservationMatrix, mu: RateParams,
                 probs: HypergraphProbs, cfg: McmcConfig):
        check_same_n(h, x)
        super().__init__(x, mu, probs, cfg)
        self.n3 = n_triplets(self.n)
        self.in_e: List[bool] = [False] * self.n2
        self.cover: List[int] = [0] * self.n2
        self.two_edges = IndexedSet()
        self.three_edges = IndexedSet()
        self.hidden_existing = IndexedSet()     # C0 = E ∩ Δ
        self.hidden_absent = IndexedSet()       # C1 = Δ \ E
        self.edge_weight = 0.0                  # Σ (x+1) over E
        self.L[0] = self.n2
        self.X[0] = sum(self.x)
        self._build_vertex_picks(x)
        for (i, j) in h.two_edges:
            self._add_2edge(pair_index(self.n, i, j))
        for t in h.three_edges:
            self._add_3edge(t)
        self.set_params(mu, probs)

    def _build_vertex_picks(self, x: ObservationMatrix) -> None:
        dense = x.as_dense().astype(float) + 1.0
        np.fill_diagonal(dense, 0.0)
        self._row_weight: List[float] = dense.sum(axis=1).tolist()        # r_i
        self._row_total = float(sum(self._row_weight))                    # Z
        self._row_cum: List[float] = np.cumsum(self._row_weight).tolist()
        self._cell_cum: List[List[float]] = np.cumsum(dense, axis=1).tolist()
        self._dense_w = dense

    # labels
    def label(self, p: int) -> int:
        if self.cover[p]:
            return 2
        return 1 if self.in_e[p] else 0

    def _triplet_pairs(self, t) -> Tuple[int, int, int]:
        i, j, k = t
        n = self.n
        return pair_index(n, i, j), pair_index(n, i, k), pair_index(n, j, k)

    # raw mutations (bookkeeping only)
    def _add_2edge(self, p: int) -> None:
        old = self.label(p)
        self.in_e[p] = True
        self.two_edges.add(p)
        self.edge_weight += self.x[p] + 1.0
        if self.cover[p]:
            self.hidden_absent.remove(p)
            self.hidden_existing.add(p)
        else:
            self._relabel(p, old, 1)

    def _remove_2edge(self, p: int) -> None:
        self.in_e[p] = False
        self.two_edges.remove(p)
        self.edge_weight -= self.x[p] + 1.0
        if self.cover[p]:
            self.hidden_existing.remove(p)
            self.hidden_absent.add(p)
        else:
            self._relabel(p, 1, 0)

    def _add_3edge(self, t) -> None:
        self.three_edges.add(t)
        for p in self._triplet_pairs(t):
            if self.cover[p] == 0:
                old = self.label(p)
                (self.hidden_existing if self.in_e[p] else self.hidden_absent).add(p)
                self._relabel(p, old, 2)
            self.cover[p] += 1

    def _remove_3edge(self, t) -> None:
        self.three_edges.remove(t)
        for p in self._triplet_pairs(t):
            self.cover[p] -= 1
            if self.cover[p] == 0:
                (self.hidden_existing if self.in_e[p] else self.hidden_absent).remove(p)
                self._relabel(p, 2, self.label(p))

    # prior
    def _log_prior_counts(self, h1: int, h2: int) -> float:
        q, pr = self.probs.q, self.probs.p
        return (h1 * math.log(q) + (self.n2 - h1) * math.log1p(-q)
                + h2 * math.log(pr) + (self.n3 - h2) * math.log1p(-pr))

    def log_structure_prior(self) -> float:
        return self._log_prior_counts(len(self.two_edges), len(self.three_edges))

    # proposal distribution
    def _class_probs_for(self, h1: int, h2: int, c0: int, c1: int) -> Dict[str, float]:
        cfg = self.cfg
        a2, r2 = _split(cfg.eta, h1 < self.n2, h1 > 0)
        a3, r3 = _split(cfg.eta, h2 < self.n3, h2 > 0)
        raw = {
            ADD_2EDGE: cfg.nu2 * a2,
            REMOVE_2EDGE: cfg.nu2 * r2,
            ADD_3EDGE: cfg.nu3 * a3,
            REMOVE_3EDGE: cfg.nu3 * r3,
            ADD_HIDDEN: cfg.nu_hidden * cfg.eta if c1 >= 2 else 0.0,
            REMOVE_HIDDEN: cfg.nu_hidden * (1.0 - cfg.eta) if c0 >= 2 else 0.0,
        }
        total = sum(raw.values())
        if total <= 0:
            return {k: 0.0 for k in raw}
        return {k: v / total for k, v in raw.items()}

    def class_probabilities(self) -> Dict[str, float]:
        return self._class_probs_for(len(self.two_edges), len(self.three_edges),
                                     len(self.hidden_existing), len(self.hidden_absent))

    def log_triplet_probability(self, t) -> float:
        """
        log P(i,j,k) of the three-step vertex pick, symmetrized over which
        vertex is drawn first:
        2 Σ_first P(first) P(second|first) P(third|first).
        """
        i, j, k = t
        w = self._dense_w
        r = self._row_weight
        s = (w[i, j] * w[i, k] / r[i] + w[j, i] * w[j, k] / r[j] + w[k, i] * w[k, j] / r[k])
        return math.log(2.0 * s / self._row_total)

    def _pick_vertex(self, rng) -> int:
        u = float(rng.random()) * self._row_total
        return min(bisect.bisect_right(self._row_cum, u), self.n - 1)

    def _pick_neighbour(self, i: int, rng) -> int:
        u = float(rng.random()) * self._row_weight[i]
        return min(bisect.bisect_right(self._cell_cum[i], u), self.n - 1)

    def propose(self, rng: np.random.Generator) -> Optional[Move]:
        kind = self._choose_class(rng)
        if kind is None:
            return None
        if kind == ADD_2EDGE:
            in_e = self.in_e
            p = self._pick_weighted_pair(
                lambda q: not in_e[q],
                lambda: 1.0 - np.asarray(in_e, dtype=float),
                rng,
            )
            return Move(kind, (p,))
        if kind == REMOVE_2EDGE:
            return Move(kind, (self.two_edges.pick(rng),))
        if kind == ADD_3EDGE:
            i = self._pick_vertex(rng)
            j = self._pick_neighbour(i, rng)
            k = self._pick_neighbour(i, rng)
            if j == k:
                return Move(kind, (i, j, k), void=True)
            t = tuple(sorted((i, j, k)))
            return Move(kind, t, void=t in self.three_edges)
        if kind == REMOVE_3EDGE:
            return Move(kind, self.three_edges.pick(rng))
        if kind == ADD_HIDDEN:
            pool, chi = self.hidden_absent, self.cfg.chi1
        else:
            pool, chi = self.hidden_existing, self.cfg.chi0
        m = sample_block_size(len(pool), chi, rng)
        return Move(kind, tuple(sorted(pool.sample(m, rng))))

    def _after_counts(self, move: Move) -> Tuple[int, int, int, int, List[Tuple[int, int, int]]]:
        """Counts (h1, h2, |C0|, |C1|) after the move plus the label changes it causes."""
        h1, h2 = len(self.two_edges), len(self.three_edges)
        c0, c1 = len(self.hidden_existing), len(self.hidden_absent)
        changes: List[Tuple[int, int, int]] = []
        kind = move.kind
        if kind in (ADD_2EDGE, REMOVE_2EDGE):
            p = move.target[0]
            adding = kind == ADD_2EDGE
            if adding == self.in_e[p]:
                raise ValueError(f"{kind} impossible: pair {p} membership already matches")
            h1 += 1 if adding else -1
            if self.cover[p]:
                c0 += 1 if adding else -1
                c1 -= 1 if adding else -1
            else:
                changes.append((p, 0, 1) if adding else (p, 1, 0))
        elif kind in (ADD_3EDGE, REMOVE_3EDGE):
            t = move.target
            adding = kind == ADD_3EDGE
            if adding == (t in self.three_edges):
                raise ValueError(f"{kind} impossible for triplet {t}")
            h2 += 1 if adding else -1
            for p in self._triplet_pairs(t):
                if adding and self.cover[p] == 0:
                    if self.in_e[p]:
                        c0 += 1
                    else:
                        c1 += 1
                    changes.append((p, self.label(p), 2))
                elif not adding and self.cover[p] == 1:
                    if self.in_e[p]:
                        c0 -= 1
                    else:
                        c1 -= 1
                    changes.append((p, 2, 1 if self.in_e[p] else 0))
        else:
            m = len(move.target)
            pool = self.hidden_absent if kind == ADD_HIDDEN else self.hidden_existing
            if any(p not in pool for p in move.target):
                raise ValueError(f"{kind} block contains pairs outside its hidden set")
            if kind == ADD_HIDDEN:
                h1, c0, c1 = h1 + m, c0 + m, c1 - m
            else:
                h1, c0, c1 = h1 - m, c0 - m, c1 + m
        return h1, h2, c0, c1, changes

    def _log_choice(self, kind: str, move: Move, h1: int, h2: int, c0: int, c1: int,
                    edge_weight: float) -> float:
        """log probability of picking `move`'s target given its class, in a state with these counts."""
        if kind == ADD_2EDGE:
            p = move.target[0]
            return math.log(self.x[p] + 1.0) - math.log(self.total_weight - edge_weight)
        if kind == REMOVE_2EDGE:
            return -math.log(h1)
        if kind == ADD_3EDGE:
            return self.log_triplet_probability(move.target)
        if kind == REMOVE_3EDGE:
            return -math.log(h2)
        m = len(move.target)
        if kind == ADD_HIDDEN:
            return log_block_probability(m, c1, self.cfg.chi1)
        return log_block_probability(m, c0, self.cfg.chi0)

    def evaluate(self, move: Move) -> Tuple[float, float]:
        """
        Returns:
            (change in log target, log Q(H|H*) − log Q(H*|H))
        """
        h1, h2 = len(self.two_edges), len(self.three_edges)
        c0, c1 = len(self.hidden_existing), len(self.hidden_absent)
        h1n, h2n, c0n, c1n, changes = self._after_counts(move)

        delta = sum(self._label_delta(p, a, b) for p, a, b in changes)
        delta += self._log_prior_counts(h1n, h2n) - self._log_prior_counts(h1, h2)

        kind, rev = move.kind, _REVERSE[move.kind]
        if kind in (ADD_2EDGE, REMOVE_2EDGE):
            w = self.x[move.target[0]] + 1.0
            weight_after = self.edge_weight + (w if kind == ADD_2EDGE else -w)
        elif kind in (ADD_HIDDEN, REMOVE_HIDDEN):
            w = sum(self.x[p] + 1.0 for p in move.target)
            weight_after = self.edge_weight + (w if kind == ADD_HIDDEN else -w)
        else:
            weight_after = self.edge_weight

        fwd_class = self._class_probs_for(h1, h2, c0, c1)[kind]
        bwd_class = self._class_probs_for(h1n, h2n, c0n, c1n)[rev]
        log_fwd = _log(fwd_class) + self._log_choice(kind, move, h1, h2, c0, c1, self.edge_weight)
        log_bwd = _log(bwd_class) + self._log_choice(rev, move, h1n, h2n, c0n, c1n, weight_after)
        return delta, log_bwd - log_fwd

    def apply(self, move: Move) -> None:
        kind = move.kind
        if kind == ADD_2EDGE:
            self._add_2edge(move.target[0])
        elif kind == REMOVE_2EDGE:
            self._remove_2edge(move.target[0])
        elif kind == ADD_3EDGE:
            self._add_3edge(move.target)
        elif kind == REMOVE_3EDGE:
            self._remove_3edge(move.target)
        elif kind == ADD_HIDDEN:
            for p in move.target:
                self._add_2edge(p)
        else:
            for p in move.target:
                self._remove_2edge(p)

    def label_matrix(self) -> LabelMatrix:
        return LabelMatrix(self.n, np.array([self.label(p) for p in range(self.n2)], dtype=np.int8))

    def structure(self) -> Hypergraph:
        two = [(self.rows[p], self.cols[p]) for p in self.two_edges]
        return Hypergraph(self.n, two, list(self.three_edges))


def make_kernel(structure, x: ObservationMatrix, mu: RateParams, probs, cfg: McmcConfig) -> _StructureKernel:
    if isinstance(structure, Hypergraph):
        return HypergraphKernel(structure, x, mu, probs, cfg)
    return GraphKernel(structure, x, mu, probs, cfg)


def mh_step_graph(g: CategoricalGraph, mu: RateParams, probs: GraphProbs, x: ObservationMatrix,
                  cfg: McmcConfig, rng: np.random.Generator) -> CategoricalGraph:
    """Single proposal on an immutable graph; chains use GraphKernel directly."""
    kernel = GraphKernel(g, x, mu, probs, cfg)
    kernel.step(rng)
    return kernel.structure()


def mh_step_hypergraph(h: Hypergraph, mu: RateParams, probs: HypergraphProbs, x: ObservationMatrix,
                       cfg: McmcConfig, rng: np.random.Generator) -> Hypergraph:
    """Single proposal on an immutable hypergraph; chains use HypergraphKernel directly."""
    kernel = HypergraphKernel(h, x, mu, probs, cfg)
    kernel.step(rng)
    return kernel.structure()

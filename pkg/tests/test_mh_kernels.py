import itertools
import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from hyper_core_modules.likelihood import generate_observations, log_joint, log_parameter_prior
from hyper_core_modules.mh_kernels import (
    ADD_2EDGE,
    ADD_3EDGE,
    ADD_HIDDEN,
    DECREMENT,
    INCREMENT,
    REMOVE_2EDGE,
    REMOVE_3EDGE,
    REMOVE_HIDDEN,
    GraphKernel,
    HypergraphKernel,
    Move,
    log_block_probability,
    mh_step_graph,
    mh_step_hypergraph,
    sample_block_size,
)
from hyper_core_modules.structures import (
    CategoricalGraph,
    GraphProbs,
    Hypergraph,
    HypergraphProbs,
    LabelMatrix,
    ObservationMatrix,
    RateParams,
    graph_from_labels,
    project_labels,
)
from stat_modules.config import Hyperparams, McmcConfig
from stat_modules.math_core import make_rng

N = 4
PAIRS = list(itertools.combinations(range(N), 2))
PIDX = {pair: p for p, pair in enumerate(PAIRS)}
TRIPLETS = list(itertools.combinations(range(N), 3))
X4 = ObservationMatrix(N, [0, 3, 1, 0, 5, 2])
MU = RateParams(0.5, 2.0, 4.0)
HPROBS = HypergraphProbs(0.3, 0.2)
GPROBS = GraphProbs(0.3, 0.2)
CFG = McmcConfig(eta=0.6, nu2=0.3, nu3=0.3, chi0=0.6, chi1=0.4)

REVERSE = {ADD_2EDGE: REMOVE_2EDGE, REMOVE_2EDGE: ADD_2EDGE, ADD_3EDGE: REMOVE_3EDGE,
           REMOVE_3EDGE: ADD_3EDGE, ADD_HIDDEN: REMOVE_HIDDEN, REMOVE_HIDDEN: ADD_HIDDEN,
           INCREMENT: DECREMENT, DECREMENT: INCREMENT}
VOID = ("void",)


def _split(eta, can_add, can_remove):
    if can_add and can_remove:
        return eta, 1 - eta
    return (1.0 if can_add else 0.0), (1.0 if can_remove else 0.0)


def _block_probability(m, size, chi):
    return (1 - chi) ** (m - 2) * chi / (1 - (1 - chi) ** (size - 1)) / math.comb(size, m)


def exact_hypergraph_proposals(two, three, cfg=CFG):
    """Proposal distribution from the move rules, keyed by (kind, target)."""
    x = X4.values
    E = {PIDX[e] for e in two}
    delta = {PIDX[pair] for t in three for pair in itertools.combinations(t, 2)}
    c0, c1 = sorted(E & delta), sorted(delta - E)
    h1, h2 = len(E), len(three)
    a2, r2 = _split(cfg.eta, h1 < len(PAIRS), h1 > 0)
    a3, r3 = _split(cfg.eta, h2 < len(TRIPLETS), h2 > 0)
    nu_h = 1 - cfg.nu2 - cfg.nu3
    raw = {ADD_2EDGE: cfg.nu2 * a2, REMOVE_2EDGE: cfg.nu2 * r2,
           ADD_3EDGE: cfg.nu3 * a3, REMOVE_3EDGE: cfg.nu3 * r3,
           ADD_HIDDEN: nu_h * cfg.eta if len(c1) >= 2 else 0.0,
           REMOVE_HIDDEN: nu_h * (1 - cfg.eta) if len(c0) >= 2 else 0.0}
    total = sum(raw.values())
    cls = {k: v / total for k, v in raw.items()}

    out = Counter()
    if cls[ADD_2EDGE]:
        denom = sum(x[p] + 1 for p in range(len(PAIRS)) if p not in E)
        for p in range(len(PAIRS)):
            if p not in E:
                out[(ADD_2EDGE, (p,))] += cls[ADD_2EDGE] * (x[p] + 1) / denom
    for p in E:
        out[(REMOVE_2EDGE, (p,))] += cls[REMOVE_2EDGE] / h1
    if cls[ADD_3EDGE]:
        w = X4.as_dense() + 1.0
        np.fill_diagonal(w, 0.0)
        r = w.sum(axis=1)
        for i, j, k in itertools.product(range(N), repeat=3):
            pr = r[i] / r.sum() * w[i, j] / r[i] * w[i, k] / r[i]
            if pr == 0:
                continue
            t = tuple(sorted((i, j, k)))
            key = VOID if j == k or t in three else (ADD_3EDGE, t)
            out[key] += cls[ADD_3EDGE] * pr
    for t in three:
        out[(REMOVE_3EDGE, t)] += cls[REMOVE_3EDGE] / h2
    for kind, pool, chi in ((ADD_HIDDEN, c1, cfg.chi1), (REMOVE_HIDDEN, c0, cfg.chi0)):
        if not cls[kind]:
            continue
        for m in range(2, len(pool) + 1):
            for block in itertools.combinations(pool, m):
                out[(kind, block)] += cls[kind] * _block_probability(m, len(pool), chi)
    return out


def apply_hypergraph_move(two, three, kind, target):
    two, three = set(two), set(three)
    if kind == ADD_2EDGE:
        two.add(PAIRS[target[0]])
    elif kind == REMOVE_2EDGE:
        two.discard(PAIRS[target[0]])
    elif kind == ADD_3EDGE:
        three.add(target)
    elif kind == REMOVE_3EDGE:
        three.discard(target)
    elif kind == ADD_HIDDEN:
        two |= {PAIRS[p] for p in target}
    else:
        two -= {PAIRS[p] for p in target}
    return frozenset(two), frozenset(three)


def all_hypergraph_states():
    for two_mask in range(1 << len(PAIRS)):
        two = frozenset(PAIRS[b] for b in range(len(PAIRS)) if two_mask >> b & 1)
        for three_mask in range(1 << len(TRIPLETS)):
            yield two, frozenset(TRIPLETS[b] for b in range(len(TRIPLETS)) if three_mask >> b & 1)


def exact_graph_proposals(labels, cfg=CFG):
    x = X4.values
    m1, m2 = labels.count(1), labels.count(2)
    inc, dec = _split(cfg.eta, m2 < len(PAIRS), m1 + m2 > 0)
    out = {}
    open_weight = sum(x[p] + 1 for p, lab in enumerate(labels) if lab < 2)
    for p, lab in enumerate(labels):
        if lab < 2 and inc:
            out[(INCREMENT, (p,))] = inc * (x[p] + 1) / open_weight
        if lab > 0 and dec:
            out[(DECREMENT, (p,))] = dec / (m1 + m2)
    return out


def _log_target(structure, probs, model, hp=None):
    hp = hp or Hyperparams()
    return log_joint(structure, X4, MU, probs, hp) - log_parameter_prior(probs, MU, hp, model)


@pytest.fixture(scope="module")
def hypergraph_kernels():
    return {state: HypergraphKernel(Hypergraph(N, state[0], state[1]), X4, MU, HPROBS, CFG)
            for state in all_hypergraph_states()}


@pytest.fixture(scope="module")
def graph_kernels():
    out = {}
    for labels in itertools.product(range(3), repeat=len(PAIRS)):
        g = graph_from_labels(LabelMatrix(N, list(labels)))
        out[labels] = GraphKernel(g, X4, MU, GPROBS, CFG)
    return out


def test_hypergraph_kernel_matches_exact_proposal_ratios(hypergraph_kernels):
    assert len(hypergraph_kernels) == 1024
    checked = 0
    for (two, three), kernel in hypergraph_kernels.items():
        q = exact_hypergraph_proposals(two, three)
        assert sum(q.values()) == pytest.approx(1.0, abs=1e-12)
        for key, prob in q.items():
            if key == VOID:
                continue
            kind, target = key
            after = apply_hypergraph_move(two, three, kind, target)
            q_back = exact_hypergraph_proposals(*after)[(REVERSE[kind], target)]
            delta, log_q = kernel.evaluate(Move(kind, target))
            assert log_q == pytest.approx(math.log(q_back) - math.log(prob), abs=1e-9)
            assert delta == pytest.approx(hypergraph_kernels[after].log_target - kernel.log_target, abs=1e-9)
            checked += 1
    assert checked >= 10 * 1024


def test_graph_kernel_matches_exact_proposal_ratios(graph_kernels):
    assert len(graph_kernels) == 729
    for labels, kernel in graph_kernels.items():
        q = exact_graph_proposals(labels)
        assert sum(q.values()) == pytest.approx(1.0, abs=1e-12)
        for (kind, target), prob in q.items():
            after = list(labels)
            after[target[0]] += 1 if kind == INCREMENT else -1
            after = tuple(after)
            q_back = exact_graph_proposals(after)[(REVERSE[kind], target)]
            delta, log_q = kernel.evaluate(Move(kind, target))
            assert log_q == pytest.approx(math.log(q_back) - math.log(prob), abs=1e-9)
            assert delta == pytest.approx(graph_kernels[after].log_target - kernel.log_target, abs=1e-9)


def test_log_target_agrees_with_log_joint(hypergraph_kernels, graph_kernels):
    for (two, three), kernel in itertools.islice(hypergraph_kernels.items(), 0, 1024, 37):
        h = Hypergraph(N, two, three)
        assert kernel.log_target == pytest.approx(_log_target(h, HPROBS, "hypergraph"), abs=1e-9)
    for labels, kernel in itertools.islice(graph_kernels.items(), 0, 729, 29):
        g = graph_from_labels(LabelMatrix(N, list(labels)))
        assert kernel.log_target == pytest.approx(_log_target(g, GPROBS, "categorical"), abs=1e-9)


def _proposal_key(move):
    return VOID if move.void else (move.kind, move.target)


@pytest.mark.parametrize("two,three", [
    ([], []),
    ([(0, 1), (1, 2)], [(0, 1, 2)]),
    ([(0, 1), (0, 2), (2, 3)], [(0, 1, 2), (0, 2, 3), (1, 2, 3)]),
])
def test_hypergraph_proposals_follow_exact_distribution(two, three):
    kernel = HypergraphKernel(Hypergraph(N, two, three), X4, MU, HPROBS, CFG)
    rng = make_rng(2024)
    draws = 100_000
    counts = Counter(_proposal_key(kernel.propose(rng)) for _ in range(draws))
    exact = exact_hypergraph_proposals(frozenset(two), frozenset(three))
    assert set(counts) <= set(exact)
    tv = 0.5 * sum(abs(counts[k] / draws - exact[k]) for k in exact)
    assert tv < 0.04


def test_graph_proposals_follow_exact_distribution():
    labels = (0, 1, 2, 0, 2, 1)
    kernel = GraphKernel(graph_from_labels(LabelMatrix(N, list(labels))), X4, MU, GPROBS, CFG)
    rng = make_rng(5)
    draws = 50_000
    counts = Counter(_proposal_key(kernel.propose(rng)) for _ in range(draws))
    exact = exact_graph_proposals(labels)
    tv = 0.5 * sum(abs(counts[k] / draws - exact[k]) for k in exact)
    assert tv < 0.02


def test_block_size_distribution():
    rng = make_rng(11)
    size, chi = 6, 0.4
    draws = [sample_block_size(size, chi, rng) for _ in range(50_000)]
    counts = Counter(draws)
    assert set(counts) <= set(range(2, size + 1))
    for m in range(2, size + 1):
        expected = math.exp(log_block_probability(m, size, chi)) * math.comb(size, m)
        assert counts[m] / len(draws) == pytest.approx(expected, abs=0.01)
    assert sample_block_size(2, 0.99, rng) == 2
    with pytest.raises(ValueError):
        sample_block_size(1, 0.5, rng)
    assert log_block_probability(1, 5, 0.5) == -math.inf


def test_empty_graph_only_increments():
    kernel = GraphKernel(CategoricalGraph(5), ObservationMatrix(5, [0] * 10), MU, GPROBS, CFG)
    assert kernel.class_probabilities() == {INCREMENT: 1.0, DECREMENT: 0.0}


def test_hidden_classes_vanish_when_infeasible():
    kernel = HypergraphKernel(Hypergraph(N, [(0, 1)]), X4, MU, HPROBS, CFG)
    probs = kernel.class_probabilities()
    assert probs[ADD_HIDDEN] == probs[REMOVE_HIDDEN] == probs[REMOVE_3EDGE] == 0.0
    assert sum(probs.values()) == pytest.approx(1.0)
    assert probs[ADD_2EDGE] / probs[REMOVE_2EDGE] == pytest.approx(0.6 / 0.4)


def test_three_edge_add_then_remove_restores_state():
    h = Hypergraph(N, [(0, 1), (1, 3)], [(1, 2, 3)])
    kernel = HypergraphKernel(h, X4, MU, HPROBS, CFG)
    start = kernel.log_target
    add = Move(ADD_3EDGE, (0, 1, 2))
    d_add, q_add = kernel.evaluate(add)
    kernel.apply(add)
    remove = Move(REMOVE_3EDGE, (0, 1, 2))
    d_rem, q_rem = kernel.evaluate(remove)
    kernel.apply(remove)
    assert kernel.structure() == h
    assert d_add + d_rem == pytest.approx(0.0, abs=1e-9)
    assert q_add + q_rem == pytest.approx(0.0, abs=1e-9)
    kernel.set_params(MU, HPROBS)
    assert kernel.log_target == pytest.approx(start, abs=1e-9)


def test_impossible_moves_raise():
    kernel = HypergraphKernel(Hypergraph(N, [(0, 1)]), X4, MU, HPROBS, CFG)
    with pytest.raises(ValueError):
        kernel.evaluate(Move(ADD_2EDGE, (PIDX[(0, 1)],)))
    with pytest.raises(ValueError):
        kernel.evaluate(Move(REMOVE_3EDGE, (0, 1, 2)))
    graph = GraphKernel(CategoricalGraph(N), X4, MU, GPROBS, CFG)
    with pytest.raises(ValueError):
        graph.evaluate(Move(DECREMENT, (0,)))


@pytest.mark.parametrize("model", ["hypergraph", "categorical"])
def test_incremental_log_target_stays_exact(model, small_data):
    h, mu, x = small_data
    rng = make_rng(3)
    if model == "hypergraph":
        kernel = HypergraphKernel(h, x, mu, HypergraphProbs(0.1, 0.01), CFG)
    else:
        kernel = GraphKernel(CategoricalGraph(h.n), x, mu, GraphProbs(0.1, 0.05), CFG)
    accepted = sum(kernel.step(rng) for _ in range(1000))
    assert accepted > 0
    running = kernel.log_target
    kernel.set_params(kernel.mu, kernel.probs)
    assert running == pytest.approx(kernel.log_target, abs=1e-8)
    proposed = sum(p for p, _ in kernel.acceptance.values())
    assert proposed == 1000
    assert all(0.0 <= r <= 1.0 for r in kernel.acceptance_rates().values())


def test_single_step_helpers_are_deterministic(small_data):
    h, mu, x = small_data
    probs = HypergraphProbs(0.1, 0.01)
    a = mh_step_hypergraph(h, mu, probs, x, CFG, make_rng(8))
    b = mh_step_hypergraph(h, mu, probs, x, CFG, make_rng(8))
    assert a == b and a.n == h.n
    g = CategoricalGraph(h.n, [(0, 1)])
    assert mh_step_graph(g, mu, GraphProbs(0.1, 0.05), x, CFG, make_rng(8)).n == h.n


def _exact_posterior(kernels):
    keys = list(kernels)
    lt = np.array([kernels[k].log_target for k in keys])
    w = np.exp(lt - lt.max())
    return keys, w / w.sum()


@pytest.mark.slow
def test_hypergraph_chain_visits_states_at_posterior_rates(hypergraph_kernels):
    keys, post = _exact_posterior(hypergraph_kernels)
    exact = Counter()
    for (two, three), pr in zip(keys, post):
        exact[(len(two), len(three))] += pr
    kernel = HypergraphKernel(Hypergraph(N), X4, MU, HPROBS, CFG)
    rng = make_rng(77)
    steps = 300_000
    seen = Counter()
    for _ in range(steps):
        kernel.step(rng)
        seen[(len(kernel.two_edges), len(kernel.three_edges))] += 1
    tv = 0.5 * sum(abs(seen[k] / steps - exact[k]) for k in set(exact) | set(seen))
    assert tv < 0.04


@pytest.mark.slow
def test_graph_chain_visits_states_at_posterior_rates(graph_kernels):
    keys, post = _exact_posterior(graph_kernels)
    exact = Counter()
    for labels, pr in zip(keys, post):
        exact[(labels.count(1), labels.count(2))] += pr
    kernel = GraphKernel(CategoricalGraph(N), X4, MU, GPROBS, CFG)
    rng = make_rng(78)
    steps = 300_000
    seen = Counter()
    for _ in range(steps):
        kernel.step(rng)
        seen[(kernel.m1, kernel.m2)] += 1
    tv = 0.5 * sum(abs(seen[k] / steps - exact[k]) for k in set(exact) | set(seen))
    assert tv < 0.04


# exhaustive posteriors for random n=4 instances
BATTERY_MU = RateParams(0.2, 10.0, 25.0)
BATTERY_HPROBS = HypergraphProbs(0.1, 0.05)
BATTERY_GPROBS = GraphProbs(0.1, 0.05)
TIDX = {t: b for b, t in enumerate(TRIPLETS)}


def _random_instance(seed):
    rng = make_rng(seed)
    two = [pair for pair in PAIRS if rng.random() < 0.4]
    three = [t for t in TRIPLETS if rng.random() < 0.25]
    truth = Hypergraph(N, two, three)
    return truth, generate_observations(project_labels(truth), BATTERY_MU, rng)


def _hypergraph_key(kernel):
    two = sum(1 << p for p in range(len(PAIRS)) if kernel.in_e[p])
    three = sum(1 << TIDX[tuple(t)] for t in kernel.three_edges)
    return two, three


def _hypergraph_from_key(key):
    two_mask, three_mask = key
    return Hypergraph(N, [PAIRS[b] for b in range(len(PAIRS)) if two_mask >> b & 1],
                      [TRIPLETS[b] for b in range(len(TRIPLETS)) if three_mask >> b & 1])


def _normalized(log_targets):
    keys = list(log_targets)
    lt = np.array([log_targets[k] for k in keys])
    w = np.exp(lt - lt.max())
    return dict(zip(keys, w / w.sum()))


def _occupancy_tv(kernel, key_of, exact, steps, rng):
    seen = Counter()
    key = key_of(kernel)
    for _ in range(steps):
        if kernel.step(rng):
            key = key_of(kernel)
        seen[key] += 1
    return 0.5 * sum(abs(seen[k] / steps - exact.get(k, 0.0)) for k in set(exact) | set(seen))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_hypergraph_chain_matches_enumerated_posterior(seed):
    _, x = _random_instance(seed)
    log_targets = {}
    for two_mask in range(1 << len(PAIRS)):
        for three_mask in range(1 << len(TRIPLETS)):
            h = _hypergraph_from_key((two_mask, three_mask))
            log_targets[(two_mask, three_mask)] = \
                HypergraphKernel(h, x, BATTERY_MU, BATTERY_HPROBS, CFG).log_target
    exact = _normalized(log_targets)
    assert len(exact) == 1024
    mode = max(exact, key=exact.get)
    kernel = HypergraphKernel(_hypergraph_from_key(mode), x, BATTERY_MU, BATTERY_HPROBS, CFG)
    assert _occupancy_tv(kernel, _hypergraph_key, exact, 400_000, make_rng(1000 + seed)) <= 0.02


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10, 20))
def test_graph_chain_matches_enumerated_posterior(seed):
    _, x = _random_instance(seed)
    log_targets = {}
    for labels in itertools.product(range(3), repeat=len(PAIRS)):
        g = graph_from_labels(LabelMatrix(N, list(labels)))
        log_targets[labels] = GraphKernel(g, x, BATTERY_MU, BATTERY_GPROBS, CFG).log_target
    exact = _normalized(log_targets)
    assert len(exact) == 729
    mode = max(exact, key=exact.get)
    kernel = GraphKernel(graph_from_labels(LabelMatrix(N, list(mode))), x, BATTERY_MU, BATTERY_GPROBS, CFG)
    assert _occupancy_tv(kernel, lambda k: tuple(k.labels), exact, 400_000, make_rng(1000 + seed)) <= 0.02


@pytest.mark.slow
def test_chains_from_different_seeds_agree():
    """Thinned (h1, h2) occupancies of two seeds are one distribution under a chi-square test."""
    tables = []
    for seed in (31, 32):
        kernel = HypergraphKernel(Hypergraph(N), X4, MU, HPROBS, CFG)
        rng = make_rng(seed)
        for _ in range(5_000):
            kernel.step(rng)
        counts = Counter()
        for t in range(600_000):
            kernel.step(rng)
            if t % 200 == 0:
                counts[(len(kernel.two_edges), len(kernel.three_edges))] += 1
        tables.append(counts)
    keys = sorted(set(tables[0]) | set(tables[1]))
    common = [k for k in keys if tables[0][k] + tables[1][k] >= 20]
    rare = [k for k in keys if k not in common]
    table = np.array([[c[k] for k in common] + [sum(c[k] for k in rare)] for c in tables])
    table = table[:, table.sum(axis=0) > 0]
    assert table.shape[1] >= 2
    _, p_value, _, _ = chi2_contingency(table)
    assert p_value > 1e-3

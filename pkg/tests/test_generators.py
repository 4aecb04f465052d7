import math

import numpy as np
import pytest

from hyper_core_modules.estimators import edge_triangle_fraction
from hyper_core_modules.generators import (
    BetaModelParams,
    SbmParams,
    best_case_hypergraph,
    beta_model_hypergraph,
    bipartite_to_hypergraph,
    generate_structure,
    hypergraph_sbm,
    random_hypergraph,
    triangle_edge_cm,
    worst_case_hypergraph,
)
from stat_modules.config import GeneratorSpec
from stat_modules.errors import ConfigError
from stat_modules.math_core import make_rng


def test_prior_model_edge_counts(rng):
    h = random_hypergraph(100, 0.00017, 0.019, rng)
    sd1 = math.sqrt(4950 * 0.019 * 0.981)
    assert abs(h.h1 - 94.05) < 4 * sd1
    sd2 = math.sqrt(161700 * 0.00017)
    assert abs(h.h2 - 161700 * 0.00017) < 4 * sd2
    with pytest.raises(ValueError):
        random_hypergraph(10, 1.5, 0.1, rng)


def test_best_case_has_no_edge_in_a_triangle(rng):
    h = best_case_hypergraph(60, 0.002, 0.1, rng)
    assert h.h1 > 0
    assert edge_triangle_fraction(h) == 0.0
    assert edge_triangle_fraction(h, within="triangles") == 0.0


def test_worst_case_cliques(rng):
    h = worst_case_hypergraph(rng=rng)
    assert h.n == 100
    assert h.h1 == 20 * 10
    assert edge_triangle_fraction(h, within="triangles") == 1.0
    assert all(max(t) // 5 == min(t) // 5 for t in h.three_edges)
    padded = worst_case_hypergraph(2, 4, 0.5, make_rng(1), n=12)
    assert padded.n == 12 and padded.h1 == 12
    with pytest.raises(ValueError):
        worst_case_hypergraph(20, 5, 0.19, rng, n=90)
    with pytest.raises(ValueError):
        worst_case_hypergraph(3, 2, 0.19, rng)


def test_sbm_concentrates_edges_within_blocks(rng):
    params = SbmParams()
    h = hypergraph_sbm(params, rng)
    assert h.n == 100
    block = np.repeat([0, 1], params.sizes)
    within = sum(1 for i, j in h.two_edges if block[i] == block[j])
    assert within > 5 * (h.h1 - within)
    with pytest.raises(ValueError):
        SbmParams(sizes=(5, 5), q=((0.1, 0.2), (0.3, 0.1)), p_in=(0.1, 0.1))


def test_configuration_model_degrees(rng):
    h = triangle_edge_cm(200, 2.0, 3.0, rng)
    assert 140 < h.h1 <= 260
    assert 140 < h.h2 <= 260
    with pytest.raises(ValueError):
        triangle_edge_cm(2, rng=rng)


def test_beta_model_extremes(rng):
    dense = beta_model_hypergraph(10, BetaModelParams(20.0, 0.01, -20.0, 0.01), rng)
    assert dense.h1 == 45 and dense.h2 == 0
    sparse = beta_model_hypergraph(10, BetaModelParams(-20.0, 0.01, 20.0, 0.01), rng)
    assert sparse.h1 == 0 and sparse.h2 == 120
    with pytest.raises(ValueError):
        BetaModelParams(sd2=0.0)


def test_bipartite_groups_become_hyperedges():
    records = [("a", "g1"), ("b", "g1"),
               ("c", "g2"), ("d", "g2"), ("e", "g2"),
               ("h", "g4"), ("i", "g4"), ("j", "g4"), ("k", "g4")]
    records += [(f"z{k}", "g3") for k in range(6)]
    h, mapping = bipartite_to_hypergraph(records)
    assert list(mapping) == ["a", "b", "c", "d", "e", "h", "i", "j", "k"]
    assert h.n == 9
    assert h.two_edges == {(0, 1)}
    assert h.h2 == 1 + 4
    assert (2, 3, 4) in h.three_edges
    only_big, empty = bipartite_to_hypergraph([(f"z{k}", "g") for k in range(6)])
    assert empty == {} and only_big.h1 == only_big.h2 == 0


def test_generate_structure_is_deterministic():
    spec = GeneratorSpec(kind="prior", params={"n": 30, "p": 0.01, "q": 0.1}, seed=5)
    assert generate_structure(spec) == generate_structure(spec)
    other = spec.model_copy(update={"seed": 6})
    assert generate_structure(other) != generate_structure(spec)


def test_generate_structure_dispatch():
    sbm = GeneratorSpec(kind="sbm", params={"sizes": [10, 10], "q": [[0.3, 0.01], [0.01, 0.3]],
                                            "p_in": [0.01, 0.01], "p_out": 0.0})
    assert generate_structure(sbm).n == 20
    assert generate_structure(GeneratorSpec(kind="cm", params={"n": 30})).n == 30
    assert generate_structure(GeneratorSpec(kind="beta", params={"n": 12})).n == 12
    worst = generate_structure(GeneratorSpec(kind="worst", params={"n_cliques": 2, "clique_size": 3}))
    assert worst.n == 6 and worst.h1 == 6


def test_generate_structure_reports_missing_parameters():
    with pytest.raises(ConfigError):
        generate_structure(GeneratorSpec(kind="prior", params={"n": 10, "p": 0.1}))
    with pytest.raises(ConfigError):
        generate_structure(GeneratorSpec(kind="sbm", params={"colour": "red"}))

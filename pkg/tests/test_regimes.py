"""Desk-scale reconstruction regimes: which model wins on which structure."""
import itertools

import networkx as nx
import pytest

from hyper_core_modules.estimators import edge_triangle_fraction
from hyper_core_modules.experiment import run_experiment
from hyper_core_modules.generators import generate_structure
from hyper_core_modules.io_formats import read_hypergraph, write_hypergraph
from hyper_core_modules.structures import Hypergraph
from stat_modules.config import ExperimentSpec, GeneratorSpec, McmcConfig

pytestmark = pytest.mark.slow

SBM = GeneratorSpec(kind="sbm", seed=1)
BEST = GeneratorSpec(kind="best", params={"n": 100, "p": 0.00017, "q": 0.019}, seed=1)
WORST = GeneratorSpec(kind="worst", seed=1)


def karate_hypergraph() -> Hypergraph:
    """Zachary's club with every maximal clique of 3+ members split into 3-edges."""
    g = nx.karate_club_graph()
    two, three = [], set()
    for clique in nx.find_cliques(g):
        if len(clique) == 2:
            two.append(tuple(clique))
        else:
            three.update(itertools.combinations(sorted(clique), 3))
    return Hypergraph(g.number_of_nodes(), two, sorted(three))


def _medians(spec, structure):
    result = run_experiment(spec, structure)
    assert result.n_failed == 0
    return {(row["model"], row["value"]): row for row in result.rows}


def _spec(source, values, replicates, n_samples=20, sample_stride=2, **kw):
    mcmc = McmcConfig.desk(n_chains=1, n_samples=n_samples, sample_stride=sample_stride)
    return ExperimentSpec(**source, sweep_values=values, mu0=0.01, mu2=50.0, replicates=replicates,
                          mcmc=mcmc, n_pred=50, n_workers=4, **kw)


def test_karate_hypergraph_shape():
    h = karate_hypergraph()
    assert h.n == 34
    assert len(h.delta()) + h.h1 == nx.karate_club_graph().number_of_edges()
    assert edge_triangle_fraction(h) == 0.0


def test_karate_hypergraph_model_is_no_worse(tmp_path):
    path = tmp_path / "karate.txt"
    write_hypergraph(karate_hypergraph(), path)
    spec = _spec({"structure_file": str(path)}, [40.0], 10, master_seed=34)
    rows = _medians(spec, read_hypergraph(path))
    hyper = rows[("hypergraph", 40.0)]["epsilon_median"]
    cat = rows[("categorical", 40.0)]["epsilon_median"]
    assert hyper <= cat
    assert hyper <= 0.16


@pytest.mark.parametrize("generator", [SBM, BEST, WORST], ids=["sbm", "best", "worst"])
def test_structural_regimes(generator):
    structure = generate_structure(generator)
    assert structure.n == 100
    rows = _medians(_spec({"generator": generator}, [40.0], 10, master_seed=100), structure)
    hyper = rows[("hypergraph", 40.0)]["epsilon_median"]
    cat = rows[("categorical", 40.0)]["epsilon_median"]
    if generator is SBM:
        assert hyper <= 0.10 and hyper < cat
    elif generator is BEST:
        assert hyper <= 0.05 and hyper < cat
    else:
        assert cat <= hyper


MU1_GRID = [10.0, 20.0, 30.0, 40.0, 45.0]


def test_best_case_sweep_favours_hypergraph_model():
    structure = generate_structure(BEST)
    rows = _medians(_spec({"generator": BEST}, MU1_GRID, 10, n_samples=10, sample_stride=1,
                          master_seed=5), structure)
    eps = [(rows[("hypergraph", v)]["epsilon_median"], rows[("categorical", v)]["epsilon_median"])
           for v in MU1_GRID]
    ent = [(rows[("hypergraph", v)]["entropy_median"], rows[("categorical", v)]["entropy_median"])
           for v in MU1_GRID]
    # at well-separated rates both models can be exact
    assert all(h <= c for h, c in eps)
    assert sum(h < c for h, c in eps) > len(MU1_GRID) // 2
    assert sum(h > c for h, c in ent) > len(MU1_GRID) // 2


def test_worst_case_sweep_favours_categorical_model():
    structure = generate_structure(WORST)
    rows = _medians(_spec({"generator": WORST}, MU1_GRID, 10, n_samples=10, sample_stride=1,
                          master_seed=6), structure)
    ordered = [rows[("categorical", v)]["epsilon_median"] <= rows[("hypergraph", v)]["epsilon_median"]
               for v in MU1_GRID]
    assert sum(ordered) > len(MU1_GRID) // 2

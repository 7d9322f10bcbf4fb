import numpy as np
import pytest

from mgcsl.errors import ConfigError
from mgcsl.graphs import (CausalGraph, GroundTruthGraph, Macro, gen_er_dag,
                          gen_sf_dag, topo_sort)


def test_er_dag_is_acyclic_and_deterministic():
    g = gen_er_dag(20, 2.0, seed=0)
    assert topo_sort(g.adj) is not None
    again = gen_er_dag(20, 2.0, seed=0)
    assert np.array_equal(g.adj, again.adj)
    other = gen_er_dag(20, 2.0, seed=1)
    assert not np.array_equal(g.adj, other.adj)


def test_er_dag_edge_density_tracks_degree():
    counts = [len(gen_er_dag(30, 2.0, seed=s).edges()) for s in range(20)]
    # expected edge count is d * degree / 2 = 30
    assert 15 <= np.mean(counts) <= 45


def test_er_degree_cannot_exceed_complete_graph():
    with pytest.raises(ConfigError):
        gen_er_dag(5, 5.0, seed=0)


def test_sf_dag_edge_count_is_exact():
    g = gen_sf_dag(20, 2.0, seed=0)
    assert topo_sort(g.adj) is not None
    # preferential attachment adds min(k, existing) parents per new node
    assert len(g.edges()) == 2 * (20 - 2) + 1
    assert np.array_equal(g.adj, gen_sf_dag(20, 2.0, seed=0).adj)


def test_sf_hubs_are_skewed():
    g = gen_sf_dag(60, 2.0, seed=3)
    out_degrees = np.sort(g.adj.sum(axis=1))[::-1]
    # a scale-free graph concentrates out-edges on few hubs
    assert out_degrees[0] >= 3 * max(1, out_degrees[len(out_degrees) // 2])


def test_topo_sort_orders_parents_first():
    adj = np.zeros((4, 4), dtype=bool)
    adj[2, 0] = adj[0, 1] = adj[1, 3] = True
    order = topo_sort(adj)
    pos = {v: k for k, v in enumerate(order)}
    assert pos[2] < pos[0] < pos[1] < pos[3]


def test_topo_sort_prefers_ascending_ids():
    assert topo_sort(np.zeros((4, 4), dtype=bool)) == [0, 1, 2, 3]


def test_topo_sort_detects_cycle():
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 1] = adj[1, 2] = adj[2, 0] = True
    assert topo_sort(adj) is None


def test_macro_coerces_members_to_tuple():
    m = Macro(id=5, members=[1, 2, 3])
    assert m.members == (1, 2, 3)
    assert hash(m) == hash(Macro(id=5, members=(1, 2, 3)))


def test_graph_rejects_bad_macro_ids():
    adj = np.zeros((4, 4), dtype=bool)
    with pytest.raises(ConfigError):
        CausalGraph(d=3, adj=adj, macros=(Macro(id=9, members=(0,)),),
                    origin="multigranular")


def test_graph_equality_and_edges():
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 2] = True
    a = GroundTruthGraph(d=3, adj=adj, macros=())
    b = GroundTruthGraph(d=3, adj=adj.copy(), macros=())
    assert a == b
    assert a.edges() == [(0, 2)]

import numpy as np
import pytest

from mgcsl.graphs import gen_er_dag, gen_sf_dag, topo_sort
from mgcsl.sem import Dataset, decompose_macro, sample_gp_sem


@pytest.fixture
def small_graph():
    return gen_er_dag(6, 1.5, seed=3)


def test_sample_shapes_and_determinism(small_graph):
    ds = sample_gp_sem(small_graph, 40, seed=7)
    assert ds.X.shape == (40, 6)
    assert np.all(np.isfinite(ds.X))
    assert ds.truth == small_graph
    again = sample_gp_sem(small_graph, 40, seed=7)
    assert np.array_equal(ds.X, again.X)
    other = sample_gp_sem(small_graph, 40, seed=8)
    assert not np.array_equal(ds.X, other.X)


def test_root_columns_scale_exactly_with_noise(small_graph):
    # roots carry pure noise, so doubling the scale doubles them sample-wise
    a = sample_gp_sem(small_graph, 30, noise_scale=1.0, seed=5)
    b = sample_gp_sem(small_graph, 30, noise_scale=2.0, seed=5)
    roots = [j for j in range(6) if not small_graph.adj[:, j].any()]
    children = [j for j in range(6) if small_graph.adj[:, j].any()]
    assert roots and children
    for j in roots:
        assert np.allclose(b.X[:, j], 2.0 * a.X[:, j], atol=1e-12)
    assert not np.allclose(b.X[:, children[0]], 2.0 * a.X[:, children[0]])


def test_children_respond_to_parents(small_graph):
    # regenerating the same graph with different noise changes children via
    # their parents even where the child's own noise stream is shared
    ds = sample_gp_sem(small_graph, 200, seed=11)
    children = [j for j in range(6) if small_graph.adj[:, j].any()]
    for j in children:
        parents = np.nonzero(small_graph.adj[:, j])[0]
        r = np.corrcoef(np.c_[ds.X[:, parents], ds.X[:, j]], rowvar=False)
        # some dependence on at least one parent
        assert np.max(np.abs(r[:-1, -1])) > 0.05


def test_additive_variant_differs_but_is_finite(small_graph):
    joint = sample_gp_sem(small_graph, 30, additive=False, seed=7)
    addi = sample_gp_sem(small_graph, 30, additive=True, seed=7)
    assert np.all(np.isfinite(addi.X))
    multi_parent = [j for j in range(6)
                    if small_graph.adj[:, j].sum() >= 2]
    if multi_parent:
        j = multi_parent[0]
        assert not np.allclose(joint.X[:, j], addi.X[:, j])


def test_random_feature_escape_hatch(small_graph):
    ds = sample_gp_sem(small_graph, 500, seed=2, rff_features=64)
    assert ds.X.shape == (500, 6)
    assert np.all(np.isfinite(ds.X))
    again = sample_gp_sem(small_graph, 500, seed=2, rff_features=64)
    assert np.array_equal(ds.X, again.X)


def test_decompose_macro_layout(small_graph):
    ds = sample_gp_sem(small_graph, 40, seed=7)
    dm = decompose_macro(ds, n_macro=2, micro_per_macro=4, seed=5)
    # 6 - 2 survivors + 2 * 4 block columns
    assert dm.X.shape == (40, 12)
    assert dm.truth.d == 12
    assert dm.truth.adj.shape == (14, 14)
    ids = [m.id for m in dm.truth.macros]
    assert ids == [12, 13]
    members = [m.members for m in dm.truth.macros]
    assert members[0] == (4, 5, 6, 7)
    assert members[1] == (8, 9, 10, 11)


def test_decompose_survivor_columns_pass_through(small_graph):
    ds = sample_gp_sem(small_graph, 40, seed=7)
    dm = decompose_macro(ds, n_macro=2, micro_per_macro=4, seed=5)
    chosen = dm.provenance["decomposed"]["source_columns"]
    survivors = [j for j in range(6) if j not in chosen]
    for pos, j in enumerate(survivors):
        assert np.array_equal(dm.X[:, pos], ds.X[:, j])


def test_decompose_blocks_derive_from_source(small_graph):
    ds = sample_gp_sem(small_graph, 40, seed=7)
    a = decompose_macro(ds, n_macro=1, micro_per_macro=3, seed=9)
    b = decompose_macro(ds, n_macro=1, micro_per_macro=3, seed=9)
    assert np.array_equal(a.X, b.X)
    c = decompose_macro(ds, n_macro=1, micro_per_macro=3, seed=10)
    assert not np.array_equal(a.X, c.X)


def test_decompose_retargets_truth_edges(small_graph):
    ds = sample_gp_sem(small_graph, 40, seed=7)
    dm = decompose_macro(ds, n_macro=2, micro_per_macro=4, seed=5)
    # every original edge touching a chosen column now touches its macro node
    chosen = dm.provenance["decomposed"]["source_columns"]
    n_edges_orig = len(small_graph.edges())
    assert len(dm.truth.edges()) == n_edges_orig
    macro_ids = {m.id for m in dm.truth.macros}
    touched = [e for e in dm.truth.edges() if set(e) & macro_ids]
    orig_touched = [e for e in small_graph.edges() if set(e) & set(chosen)]
    assert len(touched) == len(orig_touched)


def test_dataset_equality():
    x = np.zeros((3, 2))
    a = Dataset(X=x, truth=None, provenance={"kind": "unit"})
    b = Dataset(X=x.copy(), truth=None, provenance={"kind": "unit"})
    assert a == b
    assert a.n == 3 and a.d == 2


def test_sf_graph_also_samples(small_graph):
    g = gen_sf_dag(8, 2.0, seed=1)
    assert topo_sort(g.adj) is not None
    ds = sample_gp_sem(g, 25, seed=0)
    assert ds.X.shape == (25, 8)

import json

import numpy as np
import pytest

from mgcsl import data_io
from mgcsl.errors import ParseError
from mgcsl.graphs import CausalGraph, GroundTruthGraph, Macro, gen_er_dag
from mgcsl.sem import Dataset, decompose_macro, sample_gp_sem


@pytest.fixture
def dataset():
    g = gen_er_dag(5, 1.5, seed=2)
    return sample_gp_sem(g, 17, seed=4)


def test_dataset_round_trip_is_lossless(dataset, tmp_path):
    p = data_io.write_dataset(dataset, tmp_path / "d.csv")
    back = data_io.read_dataset(p)
    assert np.array_equal(back.X, dataset.X)
    assert back.truth == dataset.truth
    assert back == dataset


def test_dataset_with_macros_round_trips(dataset, tmp_path):
    dm = decompose_macro(dataset, n_macro=1, micro_per_macro=3, seed=0)
    p = data_io.write_dataset(dm, tmp_path / "m.csv")
    back = data_io.read_dataset(p)
    assert back.truth.macros == dm.truth.macros
    assert np.array_equal(back.truth.adj, dm.truth.adj)


def test_dataset_without_truth(tmp_path):
    ds = Dataset(X=np.ones((2, 3)), truth=None, provenance={})
    p = data_io.write_dataset(ds, tmp_path / "x.csv")
    assert not (tmp_path / "x.truth.json").exists()
    assert data_io.read_dataset(p).truth is None


def test_read_dataset_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ParseError) as exc:
        data_io.read_dataset(p)
    assert exc.value.line == 1


def test_read_dataset_rejects_bad_float(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2\n1.0,oops\n")
    with pytest.raises(ParseError) as exc:
        data_io.read_dataset(p)
    assert exc.value.line == 2
    assert exc.value.col == 2


def test_read_dataset_rejects_ragged_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2\n1.0,2.0\n3.0\n")
    with pytest.raises(ParseError) as exc:
        data_io.read_dataset(p)
    assert exc.value.line == 3


def test_truth_round_trip(tmp_path):
    g = GroundTruthGraph(d=3, adj=np.zeros((4, 4), dtype=bool),
                         macros=(Macro(id=3, members=(0, 2)),))
    g.adj[3, 1] = True
    p = tmp_path / "t.json"
    data_io.write_truth(g, p)
    assert data_io.read_truth(p) == g


def test_graph_round_trip_with_config(tmp_path):
    g = CausalGraph(d=3, adj=np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]],
                                      dtype=bool), macros=(), origin="micro")
    p = data_io.write_graph(g, tmp_path / "g.csv", config={"epsilon": 0.2})
    side = json.loads((tmp_path / "g.json").read_text())
    assert side["config"]["epsilon"] == 0.2
    assert side["version"].startswith("mgcsl-")
    assert data_io.read_graph(p) == g


def test_read_graph_rejects_non_binary(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("0,2\n0,0\n")
    with pytest.raises(ParseError):
        data_io.read_graph(p)


def test_version_string_has_package_tag():
    assert data_io.version_string().startswith("mgcsl-0.1.0")


def test_json_helpers_round_trip(tmp_path):
    p = tmp_path / "o.json"
    data_io.write_json({"a": [1, 2]}, p)
    assert data_io.read_json(p) == {"a": [1, 2]}
    p.write_text("{broken")
    with pytest.raises(ParseError):
        data_io.read_json(p)


def test_meta_embeds_extra_config(dataset, tmp_path):
    data_io.write_dataset(dataset, tmp_path / "d.csv",
                          extra_meta={"run_config": {"command": "generate"}})
    meta = json.loads((tmp_path / "d.meta.json").read_text())
    assert meta["run_config"]["command"] == "generate"
    assert "version" in meta

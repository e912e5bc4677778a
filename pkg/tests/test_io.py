import numpy as np
import pytest

from clbr.encoder import EmbeddingTable
from clbr.errors import DataError
from clbr.graph import NodeSpace, RelationKind, ViewDelta
from clbr.io import (
    infer_space, read_edge_list, read_embeddings, read_view_delta, write_csv, write_edge_list, write_embeddings,
    write_view_delta,
)


def test_edge_list_round_trip(tmp_path):
    pairs = np.array([[0, 3], [2, 1]])
    p = tmp_path / "e.tsv"
    write_edge_list(p, pairs, header="two edges")
    assert p.read_text().startswith("# two edges\n")
    assert np.array_equal(read_edge_list(p), pairs)


def test_edge_list_errors_name_line(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("0\t1\n0 1\n")
    with pytest.raises(DataError, match=r"e.tsv:2"):
        read_edge_list(p)
    p.write_text("0\tb\n")
    with pytest.raises(DataError, match="non-integer"):
        read_edge_list(p)


def test_infer_space():
    ub, ui, bi = np.array([[4, 2]]), np.array([[1, 7]]), np.array([[5, 0]])
    assert infer_space(ub, ui, bi) == NodeSpace(5, 8, 6)
    assert infer_space(ub, ui, bi, num_users=9) == NodeSpace(9, 8, 6)


def test_view_delta_round_trip(tmp_path):
    d = ViewDelta(added={RelationKind.UB: [(0, 1)], RelationKind.BI: [(2, 2)]}, dropped={RelationKind.UI: [(1, 0)]})
    p = tmp_path / "v.tsv"
    write_view_delta(p, d, {"seed": 5, "sampler": "heuristic"})
    back, header = read_view_delta(p)
    assert back == d and header == {"sampler": "heuristic", "seed": "5"}
    p.write_text("*\tub\t0\t0\n")
    with pytest.raises(DataError):
        read_view_delta(p)


def test_embeddings_round_trip_exactly(tmp_path):
    space = NodeSpace(2, 3, 1)
    table = EmbeddingTable.gaussian(space, 4, rng=1).weights
    p = tmp_path / "emb.tsv"
    write_embeddings(p, space, table)
    assert np.array_equal(read_embeddings(p, space), table)
    assert [line.split("\t")[0] for line in p.read_text().splitlines()] == ["user"] * 2 + ["item"] * 3 + ["bundle"]
    with pytest.raises(DataError, match="expected 7 rows"):
        read_embeddings(p, NodeSpace(3, 3, 1))


def test_csv_floats_exact(tmp_path):
    p = tmp_path / "m.csv"
    write_csv(p, ("metric", "value"), [{"metric": "recall", "value": 0.1 + 0.2}])
    assert float(p.read_text().splitlines()[1].split(",")[1]) == 0.1 + 0.2

import numpy as np
import pytest

from advgraph.errors import DataError
from advgraph.graphs import (DIRECTED, Graph, HETERO, UNDIRECTED,
                             load_edge_list, load_labels, load_split,
                             load_triples, make_negatives, save_split,
                             split_edges, subsample_edges)

from synth import antisymmetric_digraph


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_edge_list_parsing_and_id_order(tmp_path):
    path = _write(tmp_path, "g.tsv", "a\tb\nb\tc\na\tc\n")
    g = load_edge_list(path, UNDIRECTED)
    assert g.names == ["a", "b", "c"]
    assert g.num_nodes == 3 and g.num_edges == 3
    assert g.has_edge(0, 1) and g.has_edge(1, 0)


def test_edge_list_drops_self_loops_and_duplicates(tmp_path):
    path = _write(tmp_path, "g.tsv", "a\ta\na\tb\nb\ta\na\tb\n")
    g = load_edge_list(path, UNDIRECTED)
    assert g.num_edges == 1
    assert g.self_loops_dropped == 1
    assert g.duplicates_dropped == 2


def test_directed_duplicates_keep_reverse(tmp_path):
    path = _write(tmp_path, "g.tsv", "a\tb\nb\ta\na\tb\n")
    g = load_edge_list(path, DIRECTED)
    assert g.num_edges == 2
    assert g.has_edge(0, 1) and g.has_edge(1, 0)


def test_whitespace_fallback_and_bad_row(tmp_path):
    path = _write(tmp_path, "g.txt", "a b\nc d\n")
    g = load_edge_list(path, UNDIRECTED)
    assert g.num_edges == 2
    bad = _write(tmp_path, "bad.tsv", "a\tb\nonlyone\n")
    with pytest.raises(DataError, match="bad.tsv:2"):
        load_edge_list(bad, UNDIRECTED)


def test_triples_field_order(tmp_path):
    path = _write(tmp_path, "kg.tsv", "u\tlikes\tv\nv\tknows\tw\n")
    g = load_triples(path)
    assert g.kind == HETERO
    assert g.rel_names == ["likes", "knows"]
    u, r, v = (int(x) for x in g.edges[0])
    assert (g.names[u], g.rel_names[r], g.names[v]) == ("u", "likes", "v")
    assert g.has_edge(0, 1, 0) and not g.has_edge(0, 1, 1)


def test_degree_counts():
    g = Graph(DIRECTED, ["a", "b", "c"], np.array([(0, 1), (0, 2), (1, 2)]))
    assert list(g.out_degrees()) == [2, 1, 0]
    assert list(g.degrees()) == [2, 2, 2]


def test_split_edges_counts_and_disjointness():
    g = antisymmetric_digraph(n=40, m=120, seed=1)
    split = split_edges(g, 0.25, seed=3)
    assert split.pos_test.shape[0] == round(0.25 * g.num_edges)
    assert split.train_graph.num_edges == g.num_edges - split.pos_test.shape[0]
    train = {(int(u), int(v)) for u, v in split.train_graph.edges}
    for u, v in split.pos_test:
        assert (int(u), int(v)) not in train
        assert g.has_edge(int(u), int(v))


def test_keep_connected_on_a_path_picks_the_middle_edge():
    g = Graph(UNDIRECTED, list("abcd"), np.array([(0, 1), (1, 2), (2, 3)]))
    for seed in range(8):
        split = split_edges(g, 0.34, seed=seed, keep_connected=True)
        assert split.pos_test.shape[0] == 1
        u, v = sorted(int(x) for x in split.pos_test[0])
        assert (u, v) == (1, 2)
        assert np.all(split.train_graph.degrees() >= 1)


def test_keep_connected_reports_shortfall():
    g = Graph(UNDIRECTED, list("abcd"), np.array([(0, 1), (1, 2), (2, 3)]))
    with pytest.raises(DataError, match="could only hold out"):
        split_edges(g, 0.67, seed=0, keep_connected=True)


def test_negatives_avoid_edges_and_match_count():
    g = antisymmetric_digraph(n=30, m=90, seed=2)
    split = split_edges(g, 0.2, seed=0)
    split = make_negatives(split, g, gamma=0.0, seed=5)
    assert split.neg_test.shape == split.pos_test.shape
    for u, v in split.neg_test:
        assert not g.has_edge(int(u), int(v))


def test_gamma_one_negatives_are_reversals():
    g = antisymmetric_digraph(n=30, m=90, seed=2)
    split = split_edges(g, 0.2, seed=0)
    split = make_negatives(split, g, gamma=1.0, seed=5)
    pos = {(int(u), int(v)) for u, v in split.pos_test}
    for u, v in split.neg_test:
        assert (int(v), int(u)) in pos


def test_undirected_gamma_is_rejected():
    g = Graph(UNDIRECTED, list("abcd"), np.array([(0, 1), (1, 2), (2, 3), (0, 3)]))
    split = split_edges(g, 0.3, seed=0)
    with pytest.raises(DataError, match="gamma"):
        make_negatives(split, g, gamma=0.5, seed=0)


def test_infeasible_gamma_names_the_maximum():
    # reciprocal pair: reversing a held-out edge can hit a true edge
    edges = np.array([(0, 1), (1, 0), (0, 2), (2, 3), (1, 3), (3, 0)])
    g = Graph(DIRECTED, list("abcd"), edges)
    split = split_edges(g, 0.9, seed=1)
    with pytest.raises(DataError, match="max feasible gamma"):
        make_negatives(split, g, gamma=1.0, seed=0)


def test_hetero_negatives_respect_tail_type():
    from synth import typed_kg
    g, types = typed_kg(n=30, seed=0)
    split = split_edges(g, 0.2, seed=0)
    split = make_negatives(split, g, gamma=0.0, seed=1)
    for (u, r, v), (u2, r2, w) in zip(split.pos_test, split.neg_test):
        assert (int(u), int(r)) == (int(u2), int(r2))
        assert types[int(w)] == types[int(v)]
        assert not g.has_edge(int(u), int(w), int(r))


def test_split_roundtrip(tmp_path):
    g = antisymmetric_digraph(n=30, m=90, seed=4)
    split = split_edges(g, 0.2, seed=9)
    split = make_negatives(split, g, gamma=0.5, seed=9)
    path = str(tmp_path / "split.tsv")
    save_split(split, g, path)
    back = load_split(path, g)
    assert np.array_equal(np.sort(back.pos_test, axis=0), np.sort(split.pos_test, axis=0))
    assert np.array_equal(np.sort(back.neg_test, axis=0), np.sort(split.neg_test, axis=0))
    assert back.gamma == split.gamma and back.seed == split.seed
    assert back.train_graph.num_edges == split.train_graph.num_edges


def test_split_rejects_non_edge_positive(tmp_path):
    g = Graph(DIRECTED, list("abc"), np.array([(0, 1), (1, 2)]))
    path = _write(tmp_path, "s.tsv", "a\tc\tpos\n")
    with pytest.raises(DataError, match="not an edge"):
        load_split(path, g)


def test_labels_load_and_errors(tmp_path):
    g = Graph(UNDIRECTED, list("abc"), np.array([(0, 1), (1, 2)]))
    path = _write(tmp_path, "y.tsv", "a\tx\nb\ty\nc\tx\n")
    ls = load_labels(path, g)
    assert ls.num_classes == 2
    assert list(ls.node_ids) == [0, 1, 2]
    assert list(ls.y) == [0, 1, 0]
    dup = _write(tmp_path, "dup.tsv", "a\tx\na\ty\n")
    with pytest.raises(DataError, match="labeled more than once"):
        load_labels(dup, g)
    unk = _write(tmp_path, "unk.tsv", "zz\tx\n")
    with pytest.raises(DataError, match="zz"):
        load_labels(unk, g)


def test_subsample_keeps_nodes_and_counts():
    g = antisymmetric_digraph(n=30, m=90, seed=0)
    sub = subsample_edges(g, 0.4, seed=1)
    assert sub.num_nodes == g.num_nodes
    assert sub.num_edges == round(0.4 * g.num_edges)
    full = {(int(u), int(v)) for u, v in g.edges}
    assert all((int(u), int(v)) in full for u, v in sub.edges)

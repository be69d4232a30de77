import numpy as np
import pytest

from advgraph.errors import DataError
from advgraph.graphs import Graph, UNDIRECTED
from advgraph.sampling import (NegativeTable, WalkConfig, corpus_pairs,
                               extract_pairs, gaussian_sample, node2vec_walks,
                               random_walks, sample_fake_relations)


def _ring(n=8):
    edges = [(i, (i + 1) % n) for i in range(n)]
    return Graph(UNDIRECTED, [f"v{i}" for i in range(n)], np.array(edges))


def test_walks_cover_every_start_num_walks_times():
    g = _ring(6)
    cfg = WalkConfig(num_walks=3, walk_length=5, window=2)
    walks = list(random_walks(g, cfg, seed=0))
    assert len(walks) == 3 * g.num_nodes
    starts = [w[0] for w in walks]
    assert np.bincount(starts, minlength=6).tolist() == [3] * 6


def test_walk_steps_follow_edges():
    g = _ring(8)
    cfg = WalkConfig(num_walks=2, walk_length=10, window=2)
    for walk in random_walks(g, cfg, seed=1):
        assert len(walk) == 10
        for a, b in zip(walk, walk[1:]):
            assert g.has_edge(a, b)


def test_walk_stops_at_sink():
    g = Graph(UNDIRECTED, ["a", "b", "c"], np.array([(0, 1)]))
    cfg = WalkConfig(num_walks=1, walk_length=7, window=2)
    walks = {w[0]: w for w in random_walks(g, cfg, seed=0)}
    assert walks[2] == [2]


def test_biased_walks_follow_edges_and_match_uniform_at_p1q1():
    g = _ring(8)
    cfg = WalkConfig(num_walks=2, walk_length=12, window=2, p=0.25, q=4.0)
    for walk in node2vec_walks(g, cfg, seed=3):
        for a, b in zip(walk, walk[1:]):
            assert g.has_edge(a, b)
    # statistics: q >> 1 and p < 1 on a ring should backtrack often
    back = total = 0
    for walk in node2vec_walks(g, WalkConfig(num_walks=30, walk_length=20,
                                             window=2, p=0.1, q=10.0), seed=5):
        for i in range(2, len(walk)):
            total += 1
            back += walk[i] == walk[i - 2]
    assert back / total > 0.7


def test_extract_pairs_window_enumeration():
    pairs = extract_pairs([7, 8, 9, 10], window=2)
    assert (7, 9) in pairs and (9, 7) in pairs
    assert (7, 10) not in pairs
    assert len(pairs) == 10


def test_corpus_pairs_matches_per_walk_enumeration():
    walks = [[0, 1, 2, 3, 1], [4, 5], [6]]
    got = corpus_pairs(iter(walks), window=2)
    want = []
    for w in walks:
        want.extend(extract_pairs(w, 2))
    assert sorted(map(tuple, got.tolist())) == sorted(want)


def test_negative_table_frequencies_follow_powered_degrees():
    deg = np.array([16.0, 1.0, 0.0, 1.0])
    table = NegativeTable(deg, power=0.75)
    assert table.probs[2] == 0.0
    rng = np.random.default_rng(0)
    draws = table.sample(rng, 200_000)
    counts = np.bincount(draws, minlength=4)
    assert counts[2] == 0
    want = deg ** 0.75 / (deg ** 0.75).sum()
    got = counts / counts.sum()
    assert np.allclose(got, want, atol=0.01)


def test_negative_table_needs_some_degree():
    with pytest.raises(DataError):
        NegativeTable(np.zeros(4))


def test_gaussian_sample_reparameterization():
    mean = np.array([1.0, -2.0])
    log_var = np.array([0.0, np.log(4.0)])
    eps = np.array([0.5, -1.0])
    eta, back = gaussian_sample(mean, log_var, eps=eps)
    assert np.allclose(eta, [1.5, -4.0])
    assert back is eps
    rng = np.random.default_rng(0)
    draws = np.stack([gaussian_sample(mean, log_var, rng=rng)[0]
                      for _ in range(20000)])
    assert np.allclose(draws.mean(axis=0), mean, atol=0.05)
    assert np.allclose(draws.var(axis=0), [1.0, 4.0], rtol=0.05)


def test_fake_relations_never_match_and_cover_alternatives():
    rng = np.random.default_rng(2)
    r = np.array([0, 1, 2, 0, 1, 2] * 500)
    fake = sample_fake_relations(r, 3, rng)
    assert np.all(fake != r)
    assert set(np.unique(fake)) == {0, 1, 2}
    with pytest.raises(DataError):
        sample_fake_relations(np.array([0]), 1, rng)

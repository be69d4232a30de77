import logging

import numpy as np
import pytest

from advgraph.gradcheck import run_all
from advgraph.graphs import Graph, HETERO
from advgraph.models import build_model
from advgraph.models.hetero import entity_part, triple_scores
from advgraph.nn import sigmoid
from advgraph.sampling import sample_fake_relations
from advgraph.trainer import TrainConfig

from synth import typed_kg


def _model(variant="hin-te", dim=4, norm="l2", margin=1.0, flip=False, seed=0):
    g, _ = typed_kg(n=30, seed=1)
    cfg = TrainConfig(n_epoch=1, dim=dim, seed=seed, batch_size=16, neg_k=3)
    return build_model(variant, g, cfg, norm=norm, margin=margin,
                       gen_flip_sign=flip)


def test_unprojected_flavor_mean_is_node_plus_relation():
    m = _model("hin-te")
    u = np.array([2, 5])
    r = np.array([0, 1])
    want = m.g_tabs["node"][u] + m.g_tabs["rel"][r]
    assert np.allclose(m.noise_mean(u, r), want)


def test_hyperplane_projection_formula_and_annihilation():
    m = _model("hin-th", dim=3)
    w = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    m.d_tabs["w"] = w
    m.d_tabs["node"][4] = [2.0, 3.0, 5.0]
    part = entity_part("th", m.d_tabs, np.array([4]), np.array([0]))
    assert np.allclose(part, [[0.0, 3.0, 5.0]])
    # an entity parallel to the normal projects to zero
    m.d_tabs["node"][4] = [7.0, 0.0, 0.0]
    part = entity_part("th", m.d_tabs, np.array([4]), np.array([0]))
    assert np.allclose(part, 0.0)


def test_projected_flavor_matches_dense_matrix_oracle():
    m = _model("hin-td", dim=5)
    rng = np.random.default_rng(3)
    m.d_tabs["node"] = rng.standard_normal(m.d_tabs["node"].shape)
    m.d_tabs["node_p"] = rng.standard_normal(m.d_tabs["node_p"].shape)
    m.d_tabs["rel_p"] = rng.standard_normal(m.d_tabs["rel_p"].shape)
    ids = np.array([0, 3, 9, 3])
    rels = np.array([0, 1, 1, 0])
    got = entity_part("td", m.d_tabs, ids, rels)
    for row, (i, r) in enumerate(zip(ids, rels)):
        mat = np.eye(5) + np.outer(m.d_tabs["rel_p"][r], m.d_tabs["node_p"][i])
        want = m.d_tabs["node"][i] @ mat
        assert np.max(np.abs(got[row] - want)) <= 1e-12


def test_zero_projection_reduces_to_unprojected_scores():
    m_td = _model("hin-td")
    m_te = _model("hin-te")
    m_td.d_tabs["node"] = m_te.d_tabs["node"].copy()
    m_td.d_tabs["rel"] = m_te.d_tabs["rel"].copy()
    m_td.d_tabs["node_p"][:] = 0.0
    triples = m_td.triples[:10]
    assert np.max(np.abs(m_td.score_triples(triples)
                         - m_te.score_triples(triples))) <= 1e-12

    m_th = _model("hin-th")
    m_th.d_tabs["node"] = m_te.d_tabs["node"].copy()
    m_th.d_tabs["rel"] = m_te.d_tabs["rel"].copy()
    # normals orthogonal to every embedding row annihilate the projection term
    m_th.d_tabs["node"][:, 0] = 0.0
    m_te.d_tabs["node"][:, 0] = 0.0
    m_th.d_tabs["w"][:] = 0.0
    m_th.d_tabs["w"][:, 0] = 1.0
    assert np.max(np.abs(m_th.score_triples(triples)
                         - m_te.score_triples(triples))) <= 1e-12


def test_score_is_sigmoid_of_margin_minus_distance():
    m = _model("hin-te", margin=1.0)
    m.d_tabs["node"][:] = 0.0
    m.d_tabs["rel"][:] = 0.0
    s = m.score_triples(m.triples[:4])
    assert np.allclose(s, sigmoid(1.0))
    m.d_tabs["rel"][0] = [3.0, 0.0, 0.0, 0.0]
    one = m.triples[m.triples[:, 1] == 0][:1]
    assert np.allclose(m.score_triples(one), sigmoid(1.0 - 3.0))


def test_l1_distance_variant():
    m = _model("hin-te", norm="l1")
    m.d_tabs["node"][:] = 0.0
    m.d_tabs["rel"][0] = [1.0, -2.0, 0.5, 0.0]
    one = m.triples[m.triples[:, 1] == 0][:1]
    assert np.allclose(m.score_triples(one), sigmoid(1.0 - 3.5))


def test_corrupted_relation_term_increases_the_loss():
    m = _model("hin-te")
    rng = np.random.default_rng(0)
    triples = m.triples[:8]
    fake_rels = sample_fake_relations(triples[:, 1], 2, rng)
    fakes = m.generate(triples[:, 0], triples[:, 1],
                       rng.standard_normal((8, m.dim)))
    with_term, _ = m.disc_loss(triples, fake_rels, fakes)
    without, _ = m.disc_loss(triples, None, fakes)
    assert with_term > without


def test_single_relation_graph_warns_and_trains(caplog):
    edges = np.array([(0, 0, 1), (1, 0, 2), (2, 0, 3), (3, 0, 0)])
    g = Graph(HETERO, list("abcd"), edges, rel_names=["only"])
    cfg = TrainConfig(n_epoch=1, dim=3, seed=0, batch_size=4)
    with caplog.at_level(logging.WARNING):
        m = build_model("hin-te", g, cfg)
    assert any("single relation" in r.message for r in caplog.records)
    rng = np.random.default_rng(0)
    loss, _, counted = m.disc_step(np.arange(4), rng)
    assert np.isfinite(loss) and counted == 4


def test_flip_sign_flag_negates_generator_objective():
    base = _model("hin-te", flip=False)
    flipped = _model("hin-te", flip=True)
    for k in base.g_tabs:
        flipped.g_tabs[k] = base.g_tabs[k].copy()
    flipped.log_var = base.log_var.copy()
    flipped.f.load({k: v.copy() for k, v in base.f.params().items()})
    flipped.d_tabs = {k: v.copy() for k, v in base.d_tabs.items()}
    triples = base.triples[:6]
    eps = np.random.default_rng(1).standard_normal((6, base.dim))
    l0, g0 = base.gen_loss(triples, eps)
    l1, g1 = flipped.gen_loss(triples, eps)
    assert np.isclose(l1, -l0)
    assert np.allclose(g1["log_var"], -g0["log_var"])
    assert np.allclose(g1["f.W1"], -g0["f.W1"])


def test_normal_vectors_stay_unit_after_updates():
    m = _model("hin-th")
    m.d_tabs["w"] *= 3.7
    m.g_tabs["w"] *= 0.2
    m.post_disc_update()
    m.post_gen_update()
    for tabs in (m.d_tabs, m.g_tabs):
        norms = np.sqrt((tabs["w"] ** 2).sum(axis=1))
        assert np.allclose(norms, 1.0)


def test_unit_counts_match_triple_count():
    m = _model()
    assert m.disc_unit_count == m.triples.shape[0]
    assert m.gen_unit_count == m.triples.shape[0]


def test_fake_tail_enters_distance_directly():
    m = _model("hin-th")
    triples = m.triples[:3]
    u, r = triples[:, 0], triples[:, 1]
    fakes = np.full((3, m.dim), 100.0)
    _, grads = m.disc_loss(triples, None, fakes)
    # a faraway fake saturates its term; loss still finite
    loss, _ = m.disc_loss(triples, None, fakes)
    assert np.isfinite(loss)
    head = entity_part("th", m.d_tabs, u, r) + m.d_tabs["rel"][r]
    dist = np.sqrt(((head - fakes) ** 2).sum(axis=1))
    assert np.all(dist > 50.0)


def test_gradients_against_finite_differences():
    rows = run_all(variants=["hin-te", "hin-th", "hin-td"])
    assert all(ok for _, _, _, ok in rows)

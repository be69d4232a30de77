import numpy as np
import pytest

from advgraph.errors import DataError
from advgraph.models import build_model
from advgraph.sampling import WalkConfig
from advgraph.trainer import (TrainConfig, load_checkpoint, save_checkpoint,
                              train)

from synth import antisymmetric_digraph, sbm_graph, typed_kg

WALKS = WalkConfig(num_walks=2, walk_length=8, window=2)


def _ug_model(cfg, seed_g=0):
    g, _ = sbm_graph(n=24, p_in=0.3, p_out=0.05, seed=seed_g)
    return build_model("ug-dw", g, cfg, walk_cfg=WALKS)


def _cfg(**kw):
    base = dict(n_epoch=2, n_d=2, n_g=2, n_s=1, batch_size=64, lam=1.0,
                dim=6, seed=3, lr=1e-3, neg_k=3)
    base.update(kw)
    return TrainConfig(**base)


@pytest.mark.parametrize("n_epoch,n_d,n_g,n_s", [(1, 1, 1, 1), (2, 3, 2, 2), (3, 2, 4, 1)])
def test_update_counters_all_variants(n_epoch, n_d, n_g, n_s):
    cfg = _cfg(n_epoch=n_epoch, n_d=n_d, n_g=n_g, n_s=n_s)

    ug = _ug_model(cfg)
    rep = train(ug, cfg)
    pairs = ug.pairs.shape[0]
    assert rep.n_disc_updates == n_epoch * n_d * n_s * pairs
    assert rep.n_gen_updates == n_epoch * n_g * n_s * ug.graph.num_nodes

    dg_graph = antisymmetric_digraph(n=20, m=60, seed=1)
    dg = build_model("dg", dg_graph, cfg)
    rep = train(dg, cfg)
    assert rep.n_disc_updates == n_epoch * n_d * n_s * dg_graph.num_edges
    assert rep.n_gen_updates == n_epoch * n_g * n_s * dg_graph.num_nodes

    kg, _ = typed_kg(n=30, seed=0)
    hin = build_model("hin-te", kg, cfg)
    rep = train(hin, cfg)
    assert rep.n_disc_updates == n_epoch * n_d * n_s * kg.num_edges
    assert rep.n_gen_updates == n_epoch * n_g * n_s * kg.num_edges


def test_epoch_rows_accumulate_and_time():
    cfg = _cfg(n_epoch=3)
    model = _ug_model(cfg)
    seen = []
    rep = train(model, cfg, epoch_callback=seen.append)
    assert [r["epoch"] for r in rep.epochs] == [0, 1, 2]
    assert seen == rep.epochs
    counts = [r["n_disc_updates"] for r in rep.epochs]
    assert counts == sorted(counts) and counts[-1] == rep.n_disc_updates
    assert all(r["wall_time_s"] >= 0.0 for r in rep.epochs)
    assert all(np.isfinite(r["disc_loss"]) for r in rep.epochs)


def test_zero_epochs_is_a_no_op():
    cfg = _cfg(n_epoch=0)
    model = _ug_model(cfg)
    before = {k: v.copy() for k, v in model.all_tables().items()}
    rep = train(model, cfg)
    assert rep.epochs == [] and rep.n_disc_updates == 0 and rep.n_gen_updates == 0
    for k, v in model.all_tables().items():
        assert np.array_equal(v, before[k])


def test_same_seed_training_is_bit_identical():
    cfg = _cfg()
    a = _ug_model(cfg)
    b = _ug_model(cfg)
    train(a, cfg)
    train(b, cfg)
    for k, v in a.all_tables().items():
        assert np.array_equal(v, b.all_tables()[k]), k


def test_lambda_zero_skips_the_generator_entirely():
    cfg = _cfg(lam=0.0)
    model = _ug_model(cfg)
    gen_before = {k: v.copy() for k, v in model.all_tables().items()
                  if k not in ("center", "context")}
    rep = train(model, cfg)
    assert rep.n_gen_updates == 0
    assert all(r["gen_loss"] is None for r in rep.epochs)
    for k, before in gen_before.items():
        assert np.array_equal(model.all_tables()[k], before), k


def test_directed_pass_covers_every_edge_and_node():
    cfg = _cfg(batch_size=7)
    g = antisymmetric_digraph(n=15, m=40, seed=2)
    model = build_model("dg", g, cfg)
    rng = np.random.default_rng(0)
    edge_seen, node_seen, n_batches = [], [], 0
    for eidx, nodes in model.disc_batches(rng, cfg.batch_size):
        edge_seen.extend(int(i) for i in eidx)
        node_seen.extend(int(i) for i in nodes)
        n_batches += 1
    assert sorted(edge_seen) == list(range(g.num_edges))
    assert sorted(node_seen) == list(range(g.num_nodes))
    assert n_batches == -(-g.num_edges // 7)


def test_checkpoint_roundtrip_bitwise(tmp_path):
    cfg = _cfg()
    model = _ug_model(cfg)
    train(model, cfg)
    p1 = tmp_path / "a.bin"
    p2 = tmp_path / "b.bin"
    save_checkpoint(model, str(p1))
    fresh = _ug_model(cfg)
    load_checkpoint(str(p1), fresh)
    for k, v in model.all_tables().items():
        assert np.array_equal(v, fresh.all_tables()[k]), k
    save_checkpoint(fresh, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_reader_only_needs_the_file(tmp_path):
    cfg = _cfg()
    kg, _ = typed_kg(n=30, seed=0)
    model = build_model("hin-th", kg, cfg)
    path = str(tmp_path / "kg.bin")
    save_checkpoint(model, path)
    ck = load_checkpoint(path)
    assert ck.variant == "hin-th"
    assert ck.dim == cfg.dim
    assert ck.num_nodes == kg.num_nodes
    assert ck.num_relations == 2
    assert np.array_equal(ck.tables["disc.node"], model.d_tabs["node"])


def test_checkpoint_truncation_is_a_data_error(tmp_path):
    cfg = _cfg()
    model = _ug_model(cfg)
    path = tmp_path / "t.bin"
    save_checkpoint(model, str(path))
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(DataError, match="truncated"):
        load_checkpoint(str(path))


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(DataError, match="magic"):
        load_checkpoint(str(path))


def test_checkpoint_mismatches_name_both_values(tmp_path):
    cfg = _cfg()
    model = _ug_model(cfg)
    path = str(tmp_path / "m.bin")
    save_checkpoint(model, path)

    other_cfg = _cfg(dim=9)
    other = _ug_model(other_cfg)
    with pytest.raises(DataError, match="6.*9|9.*6"):
        load_checkpoint(path, other)

    nv = build_model("ug-nv", model.graph, cfg, walk_cfg=WALKS)
    with pytest.raises(DataError, match="ug-dw.*ug-nv"):
        load_checkpoint(path, nv)

    small, _ = sbm_graph(n=12, p_in=0.4, p_out=0.1, seed=5)
    shrunk = build_model("ug-dw", small, cfg, walk_cfg=WALKS)
    with pytest.raises(DataError, match="24|12"):
        load_checkpoint(path, shrunk)

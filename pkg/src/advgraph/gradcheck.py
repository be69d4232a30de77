"""Finite-difference verification of every analytic loss gradient.

Builds a tiny graph per variant, freezes all sampled quantities (negative
draws, gaussian noise, corrupted relations) inside pure loss closures, and
compares analytic gradients against central differences coordinate by
coordinate. ``inject_fault`` flips the sign of one gradient block so the
harness can demonstrate that it actually catches wrong derivatives.
"""

import numpy as np

from .errors import NumericError
from .graphs import DIRECTED, Graph, HETERO, UNDIRECTED
from .models import build_model
from .nn import SparseRows, finite_diff_check
from .sampling import WalkConfig, sample_fake_relations
from .trainer import TrainConfig

_DIM = 5
_HIDDEN = 6


def _toy_undirected():
    names = [f"n{i}" for i in range(6)]
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (1, 4)]
    return Graph(UNDIRECTED, names, np.array(edges))


def _toy_directed():
    names = [f"n{i}" for i in range(5)]
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3), (2, 4)]
    return Graph(DIRECTED, names, np.array(edges))


def _toy_hetero():
    names = [f"n{i}" for i in range(6)]
    edges = [(0, 0, 1), (1, 0, 2), (2, 1, 3), (3, 1, 4),
             (4, 0, 5), (5, 1, 0), (0, 1, 2), (1, 1, 4)]
    return Graph(HETERO, names, np.array(edges), rel_names=["r0", "r1"])


def _densify(params, grads):
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            out[name] = np.zeros_like(p)
        elif isinstance(g, SparseRows):
            out[name] = g.densify(p.shape)
        else:
            out[name] = np.asarray(g, dtype=np.float64)
    return out


def _flip(dense, fault):
    if fault:
        key = sorted(dense)[0]
        dense[key] = -dense[key]
    return dense


def _cfg(seed):
    return TrainConfig(n_epoch=1, dim=_DIM, seed=seed, neg_k=3,
                       batch_size=4, lam=0.7)


def _ug_ops(variant, fault):
    graph = _toy_undirected()
    walk_cfg = WalkConfig(num_walks=2, walk_length=6, window=2, p=0.5, q=2.0)
    model = build_model(variant, graph, _cfg(3), walk_cfg=walk_cfg,
                        hidden=_HIDDEN)
    rng = np.random.default_rng(11)
    u = model.pairs[:4, 0].copy()
    v = model.pairs[:4, 1].copy()
    negs = model.neg_table.sample(rng, (u.size, model.cfg.neg_k))
    eps = rng.standard_normal((u.size, _DIM))
    fake = model.generate(u, eps)

    dp = model.disc_params()
    gp = model.gen_params()

    def structure():
        loss, grads = model.structure_loss(u, v, negs)
        return loss, _flip(_densify(dp, grads), fault == "structure")

    def adversarial():
        loss, grads = model.disc_adv_loss(u, fake)
        return loss, _flip(_densify(dp, grads), fault == "adversarial")

    def total():
        l1, g1 = model.structure_loss(u, v, negs)
        l2, g2 = model.disc_adv_loss(u, fake)
        d1 = _densify(dp, g1)
        d2 = _densify(dp, g2)
        dense = {k: d1[k] + model.cfg.lam * d2[k] for k in dp}
        return l1 + model.cfg.lam * l2, _flip(dense, fault == "total")

    def generator():
        loss, grads = model.gen_loss(u, eps)
        return loss, _flip(_densify(gp, grads), fault == "generator")

    return model, [("structure", structure, dp),
                   ("adversarial", adversarial, dp),
                   ("total", total, dp),
                   ("generator", generator, gp)]


def _dg_ops(variant, fault):
    graph = _toy_directed()
    model = build_model(variant, graph, _cfg(5), hidden=_HIDDEN)
    rng = np.random.default_rng(13)
    eidx = np.arange(min(5, graph.num_edges))
    u = graph.edges[eidx, 0].copy()
    v = graph.edges[eidx, 1].copy()
    nodes = np.arange(graph.num_nodes)
    eps = rng.standard_normal((nodes.size, _DIM))
    fake_s, fake_t = model.generate(nodes, eps)

    dp = model.disc_params()
    gp = model.gen_params()

    def discriminator():
        l1, g1 = model.disc_pos_loss(u, v)
        l2, g2 = model.disc_neg_loss(nodes, fake_s, fake_t)
        d1 = _densify(dp, g1)
        d2 = _densify(dp, g2)
        dense = {k: d1[k] + d2[k] for k in dp}
        return l1 + l2, _flip(dense, fault == "discriminator")

    def generator():
        loss, grads = model.gen_loss(nodes, eps)
        return loss, _flip(_densify(gp, grads), fault == "generator")

    return model, [("discriminator", discriminator, dp),
                   ("generator", generator, gp)]


def _hin_ops(variant, fault):
    graph = _toy_hetero()
    model = build_model(variant, graph, _cfg(7), hidden=_HIDDEN)
    rng = np.random.default_rng(17)
    triples = graph.edges[:5].copy()
    fake_rels = sample_fake_relations(triples[:, 1], graph.num_relations, rng)
    eps = rng.standard_normal((triples.shape[0], _DIM))
    fakes = model.generate(triples[:, 0], triples[:, 1], eps)

    dp = model.disc_params()
    gp = model.gen_params()

    def discriminator():
        loss, grads = model.disc_loss(triples, fake_rels, fakes)
        return loss, _flip(_densify(dp, grads), fault == "discriminator")

    def generator():
        loss, grads = model.gen_loss(triples, eps)
        return loss, _flip(_densify(gp, grads), fault == "generator")

    return model, [("discriminator", discriminator, dp),
                   ("generator", generator, gp)]


_BUILDERS = {
    "ug-dw": _ug_ops, "ug-nv": _ug_ops,
    "dg": _dg_ops, "dg-star": _dg_ops,
    "hin-te": _hin_ops, "hin-th": _hin_ops, "hin-td": _hin_ops,
}


def run_all(variants=None, tol=1e-4, inject_fault=None):
    """Check every loss op; returns rows (variant, op, max_rel_err, ok).

    ``inject_fault`` is "variant:op" and flips one gradient block there,
    which must make that single check fail.
    """
    rows = []
    for variant in variants or sorted(_BUILDERS):
        fault_op = None
        if inject_fault:
            fv, fo = inject_fault.split(":", 1)
            if fv == variant:
                fault_op = fo
        _, ops = _BUILDERS[variant](variant, fault_op)
        for op_name, loss_fn, params in ops:
            try:
                err = finite_diff_check(loss_fn, params, tol=tol)
                rows.append((variant, op_name, err, True))
            except NumericError as exc:
                rows.append((variant, op_name, _err_of(exc), False))
    return rows


def _err_of(exc):
    # the failure message reads "... rel err X at name[i] ..."
    text = str(exc)
    try:
        return float(text.split("rel err")[1].split(" at ")[0])
    except (IndexError, ValueError):
        return float("nan")

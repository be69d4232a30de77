"""Relational variant: translation scoring over (head, relation, tail).

Three flavors share one loss shape and differ in how entity vectors are
projected per relation: none ("te"), onto a relation hyperplane ("th"), or
through per-entity/per-relation projection vectors ("td", row convention
out = (e . r_p) u_p + e). A triple scores sigmoid(margin - distance).

The discriminator sees three terms per triple: the true triple, the triple
under a corrupted relation, and a generated fake tail. The generator's
noise mean is its own projected head plus relation vector.
"""

import logging

import numpy as np

from ..errors import DataError
from ..nn import (SparseRows, TransformLayer, embedding_init, grad_log1m_sigmoid,
                  log1m_sigmoid, log_sigmoid, sigmoid)
from ..sampling import sample_fake_relations
from ..trainer import PHASE_INIT, phase_rng

log = logging.getLogger(__name__)

FLAVORS = ("te", "th", "td")


def entity_part(flavor, tables, ids, rels):
    """Per-relation projected entity rows (forward only)."""
    e = tables["node"][ids]
    if flavor == "te":
        return e
    if flavor == "th":
        w = tables["w"][rels]
        alpha = np.einsum("bd,bd->b", e, w)
        return e - alpha[:, None] * w
    rp = tables["rel_p"][rels]
    pn = tables["node_p"][ids]
    beta = np.einsum("bd,bd->b", e, rp)
    return e + beta[:, None] * pn


def triple_scores(tables, flavor, margin, norm, triples):
    """sigmoid(margin - distance) for (u, r, v) rows against given tables."""
    triples = np.asarray(triples)
    u, r, v = triples[:, 0], triples[:, 1], triples[:, 2]
    head = entity_part(flavor, tables, u, r)
    tail = entity_part(flavor, tables, v, r)
    diff = head + tables["rel"][r] - tail
    if norm == "l2":
        dist = np.sqrt(np.einsum("bd,bd->b", diff, diff))
    else:
        dist = np.abs(diff).sum(axis=1)
    return sigmoid(margin - dist)


class _Acc:
    """Accumulates row-gradient contributions per table name."""

    def __init__(self):
        self.idx = {}
        self.rows = {}

    def add(self, contribs):
        for name, idx, rows in contribs:
            self.idx.setdefault(name, []).append(np.asarray(idx))
            self.rows.setdefault(name, []).append(rows)

    def grads(self):
        return {name: SparseRows(np.concatenate(self.idx[name]),
                                 np.concatenate(self.rows[name]))
                for name in self.idx}


class TranslationModel:

    adversarial_enabled = True

    def __init__(self, graph, cfg, flavor="te", margin=1.0, norm="l2",
                 gen_flip_sign=False, hidden=None, activation="tanh", variant="hin-te"):
        if flavor not in FLAVORS:
            raise ValueError(f"unknown flavor '{flavor}'")
        if norm not in ("l1", "l2"):
            raise ValueError("norm must be 'l1' or 'l2'")
        if margin <= 0.0:
            raise ValueError("margin must be positive")
        self.graph = graph
        self.cfg = cfg
        self.variant = variant
        self.flavor = flavor
        self.margin = margin
        self.norm = norm
        self.gen_flip_sign = gen_flip_sign
        self.dim = cfg.dim
        self.triples = graph.edges
        self.num_relations = graph.num_relations
        if self.num_relations < 2:
            log.warning("graph has a single relation: the corrupted-relation "
                        "discriminator term is omitted")

        rng = phase_rng(cfg.seed, PHASE_INIT)
        n, d = graph.num_nodes, cfg.dim
        nr = self.num_relations
        self.d_tabs = self._init_side(rng, n, nr, d)
        self.g_tabs = self._init_side(rng, n, nr, d)
        self.log_var = np.zeros(d)
        self.f = TransformLayer(d, hidden=hidden, activation=activation, rng=rng)

    def _init_side(self, rng, n, nr, d):
        tabs = {"node": embedding_init(rng, n, d), "rel": embedding_init(rng, nr, d)}
        if self.flavor == "th":
            w = rng.standard_normal((nr, d))
            tabs["w"] = w / np.sqrt((w * w).sum(axis=1))[:, None]
        elif self.flavor == "td":
            tabs["node_p"] = embedding_init(rng, n, d)
            tabs["rel_p"] = embedding_init(rng, nr, d)
        return tabs

    # -- trainer interface ---------------------------------------------------

    @property
    def disc_unit_count(self):
        return self.triples.shape[0]

    @property
    def gen_unit_count(self):
        return self.triples.shape[0]

    def disc_params(self):
        return dict(self.d_tabs)

    def gen_params(self):
        p = dict(self.g_tabs)
        p["log_var"] = self.log_var
        for k, v in self.f.params().items():
            p["f." + k] = v
        return p

    def disc_batches(self, rng, batch_size):
        perm = rng.permutation(self.triples.shape[0])
        for i in range(0, perm.size, batch_size):
            yield perm[i:i + batch_size]

    gen_batches = disc_batches

    def _renorm(self, tables):
        w = tables["w"]
        norms = np.sqrt((w * w).sum(axis=1))
        w /= np.maximum(norms, 1e-12)[:, None]

    def post_disc_update(self):
        if self.flavor == "th":
            self._renorm(self.d_tabs)

    def post_gen_update(self):
        if self.flavor == "th":
            self._renorm(self.g_tabs)

    # -- flavor math -----------------------------------------------------------

    def _part_back(self, tables, ids, rels, g):
        """Backward of entity_part for upstream g; recomputes scalars."""
        e = tables["node"][ids]
        if self.flavor == "te":
            return [("node", ids, g)]
        if self.flavor == "th":
            w = tables["w"][rels]
            alpha = np.einsum("bd,bd->b", e, w)
            gw = np.einsum("bd,bd->b", g, w)
            grad_e = g - gw[:, None] * w
            grad_w = -(gw[:, None] * e + alpha[:, None] * g)
            return [("node", ids, grad_e), ("w", rels, grad_w)]
        rp = tables["rel_p"][rels]
        pn = tables["node_p"][ids]
        beta = np.einsum("bd,bd->b", e, rp)
        gpn = np.einsum("bd,bd->b", g, pn)
        grad_e = g + gpn[:, None] * rp
        return [("node", ids, grad_e), ("node_p", ids, beta[:, None] * g),
                ("rel_p", rels, gpn[:, None] * e)]

    def _dist(self, head, rel_rows, tail):
        diff = head + rel_rows - tail
        if self.norm == "l2":
            dist = np.sqrt(np.einsum("bd,bd->b", diff, diff))
        else:
            dist = np.abs(diff).sum(axis=1)
        return dist, diff

    def _dist_back(self, gdist, dist, diff):
        if self.norm == "l2":
            return (gdist / np.maximum(dist, 1e-12))[:, None] * diff
        return gdist[:, None] * np.sign(diff)

    def noise_mean(self, u, r):
        """Generator-side Gaussian mean for heads u under relations r."""
        return entity_part(self.flavor, self.g_tabs, u, r) + self.g_tabs["rel"][r]

    def generate(self, u, r, eps):
        eta = self.noise_mean(u, r) + np.exp(0.5 * self.log_var) * eps
        return self.f.forward(eta)[0]

    # -- losses ---------------------------------------------------------------

    def disc_loss(self, triples, fake_rels, fakes):
        """True-triple, corrupted-relation and fake-tail terms combined."""
        u, r, v = triples[:, 0], triples[:, 1], triples[:, 2]
        n = u.size
        acc = _Acc()

        head = entity_part(self.flavor, self.d_tabs, u, r)
        rel_rows = self.d_tabs["rel"][r]
        tail = entity_part(self.flavor, self.d_tabs, v, r)
        dist, diff = self._dist(head, rel_rows, tail)
        x = self.margin - dist
        loss = -log_sigmoid(x).sum() / n
        gdiff = self._dist_back((1.0 - sigmoid(x)) / n, dist, diff)
        acc.add(self._part_back(self.d_tabs, u, r, gdiff))
        acc.add([("rel", r, gdiff)])
        acc.add(self._part_back(self.d_tabs, v, r, -gdiff))

        if fake_rels is not None:
            head2 = entity_part(self.flavor, self.d_tabs, u, fake_rels)
            rel2 = self.d_tabs["rel"][fake_rels]
            tail2 = entity_part(self.flavor, self.d_tabs, v, fake_rels)
            dist2, diff2 = self._dist(head2, rel2, tail2)
            x2 = self.margin - dist2
            loss = loss - log1m_sigmoid(x2).sum() / n
            gdiff2 = self._dist_back(grad_log1m_sigmoid(x2) / n, dist2, diff2)
            acc.add(self._part_back(self.d_tabs, u, fake_rels, gdiff2))
            acc.add([("rel", fake_rels, gdiff2)])
            acc.add(self._part_back(self.d_tabs, v, fake_rels, -gdiff2))

        dist3, diff3 = self._dist(head, rel_rows, fakes)
        x3 = self.margin - dist3
        loss = loss - log1m_sigmoid(x3).sum() / n
        gdiff3 = self._dist_back(grad_log1m_sigmoid(x3) / n, dist3, diff3)
        acc.add(self._part_back(self.d_tabs, u, r, gdiff3))
        acc.add([("rel", r, gdiff3)])

        return loss, acc.grads()

    def disc_step(self, batch, rng):
        triples = self.triples[batch]
        if self.num_relations >= 2:
            fake_rels = sample_fake_relations(triples[:, 1], self.num_relations, rng)
        else:
            fake_rels = None
        eps = rng.standard_normal((triples.shape[0], self.dim))
        fakes = self.generate(triples[:, 0], triples[:, 1], eps)
        loss, grads = self.disc_loss(triples, fake_rels, fakes)
        return loss, grads, triples.shape[0]

    def gen_loss(self, triples, eps):
        """Generator objective under frozen discriminator and frozen eps."""
        u, r = triples[:, 0], triples[:, 1]
        n = u.size
        mean = self.noise_mean(u, r)
        eta = mean + np.exp(0.5 * self.log_var) * eps
        fake, fcache = self.f.forward(eta)

        head = entity_part(self.flavor, self.d_tabs, u, r)
        dist, diff = self._dist(head, self.d_tabs["rel"][r], fake)
        x = self.margin - dist
        sign = -1.0 if self.gen_flip_sign else 1.0
        loss = sign * log1m_sigmoid(x).sum() / n
        gdist = -sign * grad_log1m_sigmoid(x) / n
        gfake = -self._dist_back(gdist, dist, diff)
        fgrads, geta = self.f.backward(fcache, gfake)

        acc = _Acc()
        acc.add(self._part_back(self.g_tabs, u, r, geta))
        acc.add([("rel", r, geta)])
        grads = acc.grads()
        grads["log_var"] = (geta * (0.5 * (eta - mean))).sum(axis=0)
        for k, g in fgrads.items():
            grads["f." + k] = g
        return loss, grads

    def gen_step(self, batch, rng):
        triples = self.triples[batch]
        eps = rng.standard_normal((triples.shape[0], self.dim))
        loss, grads = self.gen_loss(triples, eps)
        return loss, grads, triples.shape[0]

    def score_triples(self, triples):
        return triple_scores(self.d_tabs, self.flavor, self.margin, self.norm, triples)

    # -- persistence / outputs -------------------------------------------------

    def embeddings_out(self):
        return {"node": self.d_tabs["node"], "relation": self.d_tabs["rel"]}

    def all_tables(self):
        t = {}
        for side, tabs in (("disc", self.d_tabs), ("gen", self.g_tabs)):
            for k, v in tabs.items():
                t[f"{side}.{k}"] = v
        t["log_var"] = self.log_var
        for k, v in self.f.params().items():
            t["f." + k] = v
        return t

    def load_tables(self, tables):
        for side, tabs in (("disc", self.d_tabs), ("gen", self.g_tabs)):
            for k in list(tabs):
                name = f"{side}.{k}"
                if tabs[k].shape != tables[name].shape:
                    raise DataError(f"table '{name}' shape {tables[name].shape} != {tabs[k].shape}")
                tabs[k] = tables[name].astype(np.float64)
        if self.log_var.shape != tables["log_var"].shape:
            raise DataError("log_var shape mismatch in checkpoint")
        self.log_var = tables["log_var"].astype(np.float64)
        self.f.load({k[2:]: v for k, v in tables.items() if k.startswith("f.")})

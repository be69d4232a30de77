"""Undirected variant: skip-gram structure loss plus an adversarial term.

The discriminator keeps center and context tables trained on walk pairs
with negative sampling. The generator learns per-node Gaussian means and a
transform producing fake neighbors; fakes enter the discriminator loss
weighted by lambda, so lambda=0 reduces to the plain walk-based baseline.
"""

import numpy as np

from ..errors import DataError
from ..nn import (SparseRows, TransformLayer, embedding_init, grad_log1m_sigmoid,
                  log1m_sigmoid, log_sigmoid, sigmoid)
from ..sampling import NegativeTable, WalkConfig, corpus_pairs, node2vec_walks, random_walks
from ..trainer import PHASE_CORPUS, PHASE_INIT, phase_rng


class SkipGramModel:

    def __init__(self, graph, cfg, walk_cfg=None, biased=False, hidden=None,
                 activation="tanh", variant="ug-dw"):
        self.graph = graph
        self.cfg = cfg
        self.variant = variant
        self.dim = cfg.dim
        self.lam = cfg.lam
        self.neg_k = cfg.neg_k
        walk_cfg = walk_cfg or WalkConfig()
        self.walk_cfg = walk_cfg

        walker = node2vec_walks if biased else random_walks
        walks = walker(graph, walk_cfg, phase_rng(cfg.seed, PHASE_CORPUS))
        self.pairs = corpus_pairs(walks, walk_cfg.window)
        if self.pairs.shape[0] == 0:
            raise DataError("walk corpus produced no training pairs")
        self.neg_table = NegativeTable(graph.degrees())

        rng = phase_rng(cfg.seed, PHASE_INIT)
        n, d = graph.num_nodes, cfg.dim
        self.center = embedding_init(rng, n, d)
        self.context = embedding_init(rng, n, d)
        self.z = embedding_init(rng, n, d)
        self.log_var = np.zeros(d)
        self.f = TransformLayer(d, hidden=hidden, activation=activation, rng=rng)

    # -- trainer interface ---------------------------------------------------

    @property
    def adversarial_enabled(self):
        return self.lam > 0.0

    @property
    def disc_unit_count(self):
        return self.pairs.shape[0]

    @property
    def gen_unit_count(self):
        return self.graph.num_nodes

    def disc_params(self):
        return {"center": self.center, "context": self.context}

    def gen_params(self):
        p = {"z": self.z, "log_var": self.log_var}
        for k, v in self.f.params().items():
            p["f." + k] = v
        return p

    def disc_batches(self, rng, batch_size):
        perm = rng.permutation(self.pairs.shape[0])
        for i in range(0, perm.size, batch_size):
            yield perm[i:i + batch_size]

    def gen_batches(self, rng, batch_size):
        perm = rng.permutation(self.graph.num_nodes)
        for i in range(0, perm.size, batch_size):
            yield perm[i:i + batch_size]

    def post_disc_update(self):
        pass

    def post_gen_update(self):
        pass

    # -- losses ---------------------------------------------------------------

    def generate(self, u, eps):
        """Fake neighbor embeddings for nodes u under frozen noise eps."""
        eta = self.z[u] + np.exp(0.5 * self.log_var) * eps
        fake, _ = self.f.forward(eta)
        return fake

    def structure_loss(self, u, v, negs):
        """Skip-gram loss with sampled negatives; mean over the batch."""
        n = u.size
        ctr = self.center[u]
        ctx = self.context[v]
        en = self.context[negs]
        pos = np.einsum("bd,bd->b", ctr, ctx)
        neg = np.einsum("bd,bkd->bk", ctr, en)
        loss = -(log_sigmoid(pos).sum() + log_sigmoid(-neg).sum()) / n
        gp = (sigmoid(pos) - 1.0) / n
        gq = sigmoid(neg) / n
        grad_ctr = gp[:, None] * ctx + np.einsum("bk,bkd->bd", gq, en)
        grad_ctx = gp[:, None] * ctr
        grad_en = gq[:, :, None] * ctr[:, None, :]
        ctx_idx = np.concatenate([v, negs.reshape(-1)])
        ctx_rows = np.concatenate([grad_ctx, grad_en.reshape(-1, self.dim)])
        return loss, {"center": SparseRows(u, grad_ctr),
                      "context": SparseRows(ctx_idx, ctx_rows)}

    def disc_adv_loss(self, u, fake):
        """Penalty for assigning fakes high neighbor probability."""
        n = u.size
        ctr = self.center[u]
        x = np.einsum("bd,bd->b", ctr, fake)
        loss = -log1m_sigmoid(x).sum() / n
        gx = -grad_log1m_sigmoid(x) / n
        return loss, {"center": SparseRows(u, gx[:, None] * fake)}

    def disc_step(self, batch, rng):
        pairs = self.pairs[batch]
        u, v = pairs[:, 0], pairs[:, 1]
        negs = self.neg_table.sample(rng, (u.size, self.neg_k))
        loss, grads = self.structure_loss(u, v, negs)
        if self.lam > 0.0:
            eps = rng.standard_normal((u.size, self.dim))
            fake = self.generate(u, eps)
            adv_loss, adv = self.disc_adv_loss(u, fake)
            loss = loss + self.lam * adv_loss
            sr, sa = grads["center"], adv["center"]
            grads["center"] = SparseRows(np.concatenate([sr.idx, sa.idx]),
                                         np.concatenate([sr.rows, self.lam * sa.rows]))
        return loss, grads, u.size

    def gen_loss(self, u, eps):
        """Generator objective under frozen discriminator and frozen eps."""
        n = u.size
        mean = self.z[u]
        eta = mean + np.exp(0.5 * self.log_var) * eps
        fake, cache = self.f.forward(eta)
        ctr = self.center[u]
        x = np.einsum("bd,bd->b", ctr, fake)
        loss = log1m_sigmoid(x).sum() / n
        gx = grad_log1m_sigmoid(x) / n
        fgrads, geta = self.f.backward(cache, gx[:, None] * ctr)
        grads = {"z": SparseRows(u, geta),
                 "log_var": (geta * (0.5 * (eta - mean))).sum(axis=0)}
        for k, g in fgrads.items():
            grads["f." + k] = g
        return loss, grads

    def gen_step(self, batch, rng):
        eps = rng.standard_normal((batch.size, self.dim))
        loss, grads = self.gen_loss(batch, eps)
        return loss, grads, batch.size

    # -- persistence / outputs -------------------------------------------------

    def embeddings_out(self):
        return {"center": self.center}

    def all_tables(self):
        t = {"center": self.center, "context": self.context, "z": self.z,
             "log_var": self.log_var}
        for k, v in self.f.params().items():
            t["f." + k] = v
        return t

    def load_tables(self, tables):
        for name in ("center", "context", "z", "log_var"):
            cur = getattr(self, name)
            if cur.shape != tables[name].shape:
                raise DataError(f"table '{name}' shape {tables[name].shape} != {cur.shape}")
            setattr(self, name, tables[name].astype(np.float64))
        self.f.load({k[2:]: v for k, v in tables.items() if k.startswith("f.")})


def lp_score(center, pairs):
    """Link probability between endpoint rows of the center table."""
    pairs = np.asarray(pairs)
    return sigmoid(np.einsum("bd,bd->b", center[pairs[:, 0]], center[pairs[:, 1]]))

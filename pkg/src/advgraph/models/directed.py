"""Directed variant: per-node source and target vectors.

Edge (u, v) is scored by sigmoid(s_u . t_v), so reversing an edge changes
the score. Two transforms share one noise draw per node and produce a fake
source and a fake target; the star variant keeps only the target side.
"""

import numpy as np

from ..errors import DataError
from ..nn import (SparseRows, TransformLayer, embedding_init, grad_log1m_sigmoid,
                  log1m_sigmoid, log_sigmoid, sigmoid)
from ..trainer import PHASE_INIT, phase_rng


class SourceTargetModel:

    adversarial_enabled = True

    def __init__(self, graph, cfg, star=False, hidden=None, activation="tanh",
                 variant="dg"):
        self.graph = graph
        self.cfg = cfg
        self.variant = variant
        self.dim = cfg.dim
        self.star = star

        rng = phase_rng(cfg.seed, PHASE_INIT)
        n, d = graph.num_nodes, cfg.dim
        self.s = embedding_init(rng, n, d)
        self.t = embedding_init(rng, n, d)
        self.z = embedding_init(rng, n, d)
        self.log_var = np.zeros(d)
        self.fs = None if star else TransformLayer(d, hidden=hidden, activation=activation, rng=rng)
        self.ft = TransformLayer(d, hidden=hidden, activation=activation, rng=rng)

    # -- trainer interface ---------------------------------------------------

    @property
    def disc_unit_count(self):
        return self.graph.num_edges

    @property
    def gen_unit_count(self):
        return self.graph.num_nodes

    def disc_params(self):
        return {"s": self.s, "t": self.t}

    def gen_params(self):
        p = {"z": self.z, "log_var": self.log_var}
        if self.fs is not None:
            for k, v in self.fs.params().items():
                p["fs." + k] = v
        for k, v in self.ft.params().items():
            p["ft." + k] = v
        return p

    def disc_batches(self, rng, batch_size):
        # each pass covers every edge (positives) and every node (fakes);
        # the node pass is spread evenly across the edge minibatches
        eperm = rng.permutation(self.graph.num_edges)
        nperm = rng.permutation(self.graph.num_nodes)
        n_chunks = max(1, int(np.ceil(eperm.size / batch_size)))
        node_chunks = np.array_split(nperm, n_chunks)
        for i in range(n_chunks):
            yield eperm[i * batch_size:(i + 1) * batch_size], node_chunks[i]

    def gen_batches(self, rng, batch_size):
        perm = rng.permutation(self.graph.num_nodes)
        for i in range(0, perm.size, batch_size):
            yield perm[i:i + batch_size]

    def post_disc_update(self):
        pass

    def post_gen_update(self):
        pass

    # -- losses ---------------------------------------------------------------

    def generate(self, nodes, eps):
        """Fake (source, target) rows from one shared draw per node."""
        eta = self.z[nodes] + np.exp(0.5 * self.log_var) * eps
        fake_s = None if self.star else self.fs.forward(eta)[0]
        fake_t = self.ft.forward(eta)[0]
        return fake_s, fake_t

    def disc_pos_loss(self, u, v):
        n = u.size
        su, tv = self.s[u], self.t[v]
        x = np.einsum("bd,bd->b", su, tv)
        loss = -log_sigmoid(x).sum() / n
        gx = (sigmoid(x) - 1.0) / n
        return loss, {"s": SparseRows(u, gx[:, None] * tv),
                      "t": SparseRows(v, gx[:, None] * su)}

    def disc_neg_loss(self, nodes, fake_s, fake_t):
        n = nodes.size
        tn, sn = self.t[nodes], self.s[nodes]
        x2 = np.einsum("bd,bd->b", sn, fake_t)
        loss = -log1m_sigmoid(x2).sum() / n
        g2 = -grad_log1m_sigmoid(x2) / n
        grads = {"s": SparseRows(nodes, g2[:, None] * fake_t)}
        if not self.star:
            x1 = np.einsum("bd,bd->b", fake_s, tn)
            loss = loss - log1m_sigmoid(x1).sum() / n
            g1 = -grad_log1m_sigmoid(x1) / n
            grads["t"] = SparseRows(nodes, g1[:, None] * fake_s)
        return loss, grads

    def disc_step(self, batch, rng):
        eidx, nodes = batch
        edges = self.graph.edges[eidx]
        loss, grads = self.disc_pos_loss(edges[:, 0], edges[:, 1])
        if nodes.size:
            eps = rng.standard_normal((nodes.size, self.dim))
            fake_s, fake_t = self.generate(nodes, eps)
            nloss, ngrads = self.disc_neg_loss(nodes, fake_s, fake_t)
            loss = loss + nloss
            for key, sr in ngrads.items():
                base = grads[key]
                grads[key] = SparseRows(np.concatenate([base.idx, sr.idx]),
                                        np.concatenate([base.rows, sr.rows]))
        return loss, grads, eidx.size

    def gen_loss(self, nodes, eps):
        n = nodes.size
        mean = self.z[nodes]
        eta = mean + np.exp(0.5 * self.log_var) * eps
        fake_t, tcache = self.ft.forward(eta)
        sn, tn = self.s[nodes], self.t[nodes]
        x2 = np.einsum("bd,bd->b", sn, fake_t)
        loss = log1m_sigmoid(x2).sum() / n
        g2 = grad_log1m_sigmoid(x2) / n
        tgrads, geta = self.ft.backward(tcache, g2[:, None] * sn)
        grads = {}
        for k, g in tgrads.items():
            grads["ft." + k] = g
        if not self.star:
            fake_s, scache = self.fs.forward(eta)
            x1 = np.einsum("bd,bd->b", fake_s, tn)
            loss = loss + log1m_sigmoid(x1).sum() / n
            g1 = grad_log1m_sigmoid(x1) / n
            sgrads, geta_s = self.fs.backward(scache, g1[:, None] * tn)
            geta = geta + geta_s
            for k, g in sgrads.items():
                grads["fs." + k] = g
        grads["z"] = SparseRows(nodes, geta)
        grads["log_var"] = (geta * (0.5 * (eta - mean))).sum(axis=0)
        return loss, grads

    def gen_step(self, batch, rng):
        eps = rng.standard_normal((batch.size, self.dim))
        loss, grads = self.gen_loss(batch, eps)
        return loss, grads, batch.size

    # -- persistence / outputs -------------------------------------------------

    def embeddings_out(self):
        return {"source": self.s, "target": self.t}

    def all_tables(self):
        t = {"s": self.s, "t": self.t, "z": self.z, "log_var": self.log_var}
        if self.fs is not None:
            for k, v in self.fs.params().items():
                t["fs." + k] = v
        for k, v in self.ft.params().items():
            t["ft." + k] = v
        return t

    def load_tables(self, tables):
        for name in ("s", "t", "z", "log_var"):
            cur = getattr(self, name)
            if cur.shape != tables[name].shape:
                raise DataError(f"table '{name}' shape {tables[name].shape} != {cur.shape}")
            setattr(self, name, tables[name].astype(np.float64))
        if self.fs is not None:
            self.fs.load({k[3:]: v for k, v in tables.items() if k.startswith("fs.")})
        self.ft.load({k[3:]: v for k, v in tables.items() if k.startswith("ft.")})


def lp_score(source, target, pairs):
    """Directed link score s_u . t_v (monotone in the link probability)."""
    pairs = np.asarray(pairs)
    return np.einsum("bd,bd->b", source[pairs[:, 0]], target[pairs[:, 1]])

"""Walk generation and the samplers feeding training batches.

Walks follow undirected neighbors or directed out-edges, stop early at
sinks, and are reproducible from a seed. Negative nodes come from a
degree^0.75 table sampled by binary search over the cumulative mass.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class WalkConfig:
    num_walks: int = 10
    walk_length: int = 80
    window: int = 10
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if self.num_walks < 1 or self.walk_length < 1 or self.window < 1:
            raise ValueError("walk counts, length and window must be positive")
        if self.window > self.walk_length:
            raise ValueError("window cannot exceed walk length")
        if self.p <= 0.0 or self.q <= 0.0:
            raise ValueError("p and q must be positive")


def random_walks(graph, cfg, seed):
    """Yield truncated uniform walks: num_walks passes over shuffled nodes."""
    rng = np.random.default_rng(seed)
    for _ in range(cfg.num_walks):
        for start in rng.permutation(graph.num_nodes):
            walk = [int(start)]
            cur = int(start)
            while len(walk) < cfg.walk_length:
                nbrs = graph.neighbors(cur)
                if len(nbrs) == 0:
                    break
                cur = int(nbrs[rng.integers(len(nbrs))])
                walk.append(cur)
            yield walk


def _biased_weights(graph, prev, nbrs, p, q):
    # second-order weights: return toward prev scaled 1/p, nodes adjacent
    # to prev keep weight 1, everything else scaled 1/q
    w = np.empty(len(nbrs), dtype=np.float64)
    for i, x in enumerate(nbrs):
        x = int(x)
        if x == prev:
            w[i] = 1.0 / p
        elif graph.has_edge(prev, x):
            w[i] = 1.0
        else:
            w[i] = 1.0 / q
    return w


def node2vec_walks(graph, cfg, seed):
    """Yield second-order biased walks; p=q=1 matches the uniform walker."""
    rng = np.random.default_rng(seed)
    for _ in range(cfg.num_walks):
        for start in rng.permutation(graph.num_nodes):
            walk = [int(start)]
            cur = int(start)
            prev = -1
            while len(walk) < cfg.walk_length:
                nbrs = graph.neighbors(cur)
                if len(nbrs) == 0:
                    break
                if prev < 0:
                    nxt = int(nbrs[rng.integers(len(nbrs))])
                else:
                    w = _biased_weights(graph, prev, nbrs, cfg.p, cfg.q)
                    cum = np.cumsum(w)
                    k = np.searchsorted(cum, rng.random() * cum[-1], side="right")
                    nxt = int(nbrs[min(k, len(nbrs) - 1)])
                prev = cur
                cur = nxt
                walk.append(cur)
            yield walk


def extract_pairs(walk, window):
    """All (center, context) pairs within the window, both directions."""
    pairs = []
    n = len(walk)
    for i in range(n):
        lo = max(0, i - window)
        hi = min(n, i + window + 1)
        for j in range(lo, hi):
            if j != i:
                pairs.append((walk[i], walk[j]))
    return pairs


def corpus_pairs(walks, window):
    """Stack skip-gram pairs for a whole walk corpus into one int array."""
    chunks = []
    for walk in walks:
        w = np.asarray(walk, dtype=np.int64)
        n = w.size
        if n < 2:
            continue
        for off in range(1, min(window, n - 1) + 1):
            a, b = w[:-off], w[off:]
            chunks.append(np.stack([a, b], axis=1))
            chunks.append(np.stack([b, a], axis=1))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(chunks, axis=0)


class NegativeTable:
    """Unigram-style negative sampler over degree**power, binary-searched."""

    def __init__(self, degrees, power=0.75):
        deg = np.asarray(degrees, dtype=np.float64)
        if deg.size == 0 or not np.any(deg > 0):
            raise DataError("negative table needs at least one node with edges")
        mass = deg ** power
        total = mass.sum()
        self.probs = mass / total
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    def sample(self, rng, size):
        return np.searchsorted(self._cum, rng.random(size), side="right").astype(np.int64)


@dataclass
class NoiseSpec:
    """Diagonal Gaussian in embedding space, parameterized by log variance."""
    mean: np.ndarray
    log_var: np.ndarray


def gaussian_sample(mean, log_var, rng=None, eps=None):
    """Reparameterized draw eta = mean + exp(log_var/2) * eps.

    Returns (eta, eps) so callers can freeze eps and recompute eta under
    perturbed parameters. mean may be a single vector or a batch of rows;
    log_var broadcasts across the batch.
    """
    mean = np.asarray(mean, dtype=np.float64)
    if eps is None:
        eps = rng.standard_normal(mean.shape)
    std = np.exp(0.5 * np.asarray(log_var, dtype=np.float64))
    return mean + std * eps, eps


def sample_noise(spec, rng, eps=None):
    eta, _ = gaussian_sample(spec.mean, spec.log_var, rng=rng, eps=eps)
    return eta


def sample_fake_relations(r, num_relations, rng):
    """Uniform relation ids over R \\ {r}; r may be a scalar or an array."""
    if num_relations < 2:
        raise DataError("cannot corrupt relations: graph has fewer than 2 relations")
    r = np.asarray(r, dtype=np.int64)
    draw = rng.integers(0, num_relations - 1, size=r.shape)
    return draw + (draw >= r)

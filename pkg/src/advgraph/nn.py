"""Numeric kernel: stable sigmoid family, a small two-layer transform with
hand-derived gradients, SGD/Adam with sparse row updates, and a central
finite-difference gradient checker.

Everything is float64 numpy. Gradients are exact for the clamped forms,
i.e. the derivative of a clamped term is zero inside the clamp region, so
analytic and numeric gradients agree everywhere.
"""

import numpy as np

from .errors import NumericError

# probability clamp used inside log(1 - p) terms; caps losses at -log(EPS_PROB)
EPS_PROB = 1e-7


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def log_sigmoid(x):
    # log sigmoid(x) = -softplus(-x), stable for any magnitude
    x = np.asarray(x, dtype=np.float64)
    return -np.logaddexp(0.0, -x)


def log1m_sigmoid(x):
    """log(1 - sigmoid(x)) with the probability clamped to [EPS_PROB, 1-EPS_PROB]."""
    p = np.clip(sigmoid(x), EPS_PROB, 1.0 - EPS_PROB)
    return np.log1p(-p)


def grad_log1m_sigmoid(x):
    """d/dx of the clamped log(1 - sigmoid(x)): -sigmoid(x), zero where clamped."""
    p = sigmoid(x)
    inside = (p > EPS_PROB) & (p < 1.0 - EPS_PROB)
    return np.where(inside, -p, 0.0)


def glorot_uniform(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def embedding_init(rng, n, dim):
    # word2vec-style tight uniform init
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim))


class SparseRows:
    """Row-indexed gradient contribution for an embedding table.

    ``idx`` may contain repeats; consumers aggregate before applying.
    """

    __slots__ = ("idx", "rows")

    def __init__(self, idx, rows):
        self.idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        self.rows = np.asarray(rows, dtype=np.float64).reshape(self.idx.size, -1)

    def densify(self, shape):
        buf = np.zeros(shape, dtype=np.float64)
        np.add.at(buf, self.idx, self.rows)
        return buf


def aggregate_rows(idx, rows):
    """Sum duplicate row gradients; returns (unique_idx, summed_rows)."""
    uniq, inv = np.unique(idx, return_inverse=True)
    agg = np.zeros((uniq.size, rows.shape[1]), dtype=np.float64)
    np.add.at(agg, inv, rows)
    return uniq, agg


class TransformLayer:
    """Two-layer perceptron mapping noise vectors to fake embeddings.

    out = act(z W1 + b1) W2 + b2 with row-vector inputs of width ``dim``.
    Hidden width defaults to ``dim``. Forward returns a cache consumed by
    backward, which yields parameter gradients plus the gradient w.r.t. z.
    """

    def __init__(self, dim, hidden=None, activation="tanh", rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        if activation not in ("tanh", "relu"):
            raise ValueError("activation must be 'tanh' or 'relu'")
        hidden = dim if hidden is None else hidden
        self.dim = dim
        self.hidden = hidden
        self.activation = activation
        self.W1 = glorot_uniform(rng, dim, hidden)
        self.b1 = np.zeros(hidden)
        self.W2 = glorot_uniform(rng, hidden, dim)
        self.b2 = np.zeros(dim)

    def params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def load(self, tables):
        for name in ("W1", "b1", "W2", "b2"):
            cur = getattr(self, name)
            new = tables[name]
            if cur.shape != new.shape:
                raise ValueError(f"shape mismatch for {name}: {cur.shape} vs {new.shape}")
            setattr(self, name, new.astype(np.float64))

    def forward(self, z):
        z = np.asarray(z, dtype=np.float64)
        single = z.ndim == 1
        z2 = np.atleast_2d(z)
        pre = z2 @ self.W1 + self.b1
        if self.activation == "tanh":
            act = np.tanh(pre)
        else:
            act = np.maximum(pre, 0.0)
        out = act @ self.W2 + self.b2
        cache = (z2, pre, act)
        return (out[0] if single else out), cache

    def backward(self, cache, grad_out):
        z2, pre, act = cache
        g = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        grads = {
            "W2": act.T @ g,
            "b2": g.sum(axis=0),
        }
        ga = g @ self.W2.T
        if self.activation == "tanh":
            gpre = ga * (1.0 - act * act)
        else:
            gpre = ga * (pre > 0.0)
        grads["W1"] = z2.T @ gpre
        grads["b1"] = gpre.sum(axis=0)
        grad_z = gpre @ self.W1.T
        if np.asarray(grad_out).ndim == 1:
            grad_z = grad_z[0]
        return grads, grad_z


def _check_updated_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values after update of '{name}'")


class SGD:
    def __init__(self, lr=0.01):
        self.lr = lr

    def update(self, params, grads):
        for name, g in grads.items():
            p = params[name]
            if isinstance(g, SparseRows):
                rows, agg = aggregate_rows(g.idx, g.rows)
                p[rows] -= self.lr * agg
                _check_updated_finite(name, p[rows])
            else:
                p -= self.lr * g
                _check_updated_finite(name, p)


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {}
        self._v = {}
        self._t = {}

    def _state(self, name, shape):
        if name not in self._m:
            self._m[name] = np.zeros(shape)
            self._v[name] = np.zeros(shape)
            self._t[name] = 0
        return self._m[name], self._v[name]

    def update(self, params, grads):
        for name, g in grads.items():
            p = params[name]
            m, v = self._state(name, p.shape)
            self._t[name] += 1
            t = self._t[name]
            c1 = 1.0 - self.beta1 ** t
            c2 = 1.0 - self.beta2 ** t
            if isinstance(g, SparseRows):
                # lazy variant: moments advance only on touched rows
                rows, agg = aggregate_rows(g.idx, g.rows)
                m[rows] = self.beta1 * m[rows] + (1.0 - self.beta1) * agg
                v[rows] = self.beta2 * v[rows] + (1.0 - self.beta2) * agg * agg
                step = self.lr * (m[rows] / c1) / (np.sqrt(v[rows] / c2) + self.eps)
                p[rows] -= step
                _check_updated_finite(name, p[rows])
            else:
                m += (1.0 - self.beta1) * (g - m)
                v += (1.0 - self.beta2) * (g * g - v)
                p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
                _check_updated_finite(name, p)


def make_optimizer(kind, lr):
    if kind == "adam":
        return Adam(lr=lr)
    if kind == "sgd":
        return SGD(lr=lr)
    raise ValueError(f"unknown optimizer '{kind}'")


def finite_diff_check(loss_fn, params, eps=1e-5, tol=1e-4, rng=None, max_coords=None):
    """Central-difference gradient check.

    ``loss_fn()`` must deterministically return (loss, grads) where grads maps
    each key of ``params`` to a dense array of matching shape; any sampling
    inside must be frozen. Checks every coordinate, or a random subset of
    ``max_coords`` per parameter. Raises NumericError naming the worst
    coordinate when the max relative error exceeds ``tol``; otherwise returns
    the max relative error.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    _, grads = loss_fn()
    worst = 0.0
    worst_where = ""
    for name in sorted(params):
        p = params[name]
        flat = p.reshape(-1)
        gflat = np.asarray(grads[name], dtype=np.float64).reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = np.sort(rng.choice(n, size=max_coords, replace=False))
        else:
            coords = np.arange(n)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            lp, _ = loss_fn()
            flat[i] = orig - eps
            lm, _ = loss_fn()
            flat[i] = orig
            num = (lp - lm) / (2.0 * eps)
            ana = gflat[i]
            err = abs(num - ana) / max(abs(num) + abs(ana), 1e-6)
            if err > worst:
                worst = err
                worst_where = f"{name}[{i}] analytic={ana:.8g} numeric={num:.8g}"
    if worst > tol:
        raise NumericError(f"gradient check failed: rel err {worst:.3g} at {worst_where}")
    return worst

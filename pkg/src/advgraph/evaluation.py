"""Evaluation: ranking metrics, an internal one-vs-rest logistic
classifier, and task protocols that emit uniform metric rows.

The AUC uses the rank-statistic form with average ranks for ties (ties
count half). Top-k selection breaks score ties by ascending node id.
"""

import numpy as np

from .errors import DataError
from .nn import sigmoid


def _rankdata(a):
    # average ranks (1-based) with ties sharing their mean rank
    a = np.asarray(a, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    sa = a[order]
    new_run = np.r_[True, sa[1:] != sa[:-1]]
    run_id = np.cumsum(new_run) - 1
    starts = np.flatnonzero(new_run)
    ends = np.r_[starts[1:], sa.size]
    avg = (starts + 1 + ends) / 2.0
    out = np.empty(a.size)
    out[order] = avg[run_id]
    return out


def auc(pos_scores, neg_scores):
    """Probability a random positive outscores a random negative (ties 0.5)."""
    pos = np.asarray(pos_scores, dtype=np.float64).reshape(-1)
    neg = np.asarray(neg_scores, dtype=np.float64).reshape(-1)
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC needs at least one positive and one negative score")
    ranks = _rankdata(np.concatenate([pos, neg]))
    u = ranks[:pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


class LogisticRegressionOVR:
    """One-vs-rest binary logistic regressors with an L2 penalty.

    Trained by deterministic full-batch gradient descent with a fixed step
    1/L (L from 100 power iterations on the augmented Gram matrix), until
    the gradient norm drops below ``tol`` or ``max_iter`` steps.
    """

    def __init__(self, l2=1.0, max_iter=5000, tol=1e-6):
        if l2 < 0.0:
            raise ValueError("l2 must be >= 0")
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol
        self.W = None

    def fit(self, X, y, num_classes=None, class_names=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] != y.size or X.shape[0] == 0:
            raise DataError("features and labels must align and be non-empty")
        n_classes = int(num_classes if num_classes is not None else y.max() + 1)
        counts = np.bincount(y, minlength=n_classes)
        for c in np.flatnonzero(counts == 0):
            name = class_names[c] if class_names else str(c)
            raise DataError(f"class '{name}' absent from training set")
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        gram = Xa.T @ Xa
        v = np.ones(gram.shape[0]) / np.sqrt(gram.shape[0])
        for _ in range(100):
            v = gram @ v
            v /= max(np.linalg.norm(v), 1e-30)
        lam_max = float(v @ (gram @ v))
        lr = 1.0 / (0.25 * lam_max + self.l2 + 1e-12)
        W = np.zeros((n_classes, Xa.shape[1]))
        for c in range(n_classes):
            t = np.where(y == c, 1.0, -1.0)
            w = W[c]
            for _ in range(self.max_iter):
                m = Xa @ w
                g = Xa.T @ (-t * sigmoid(-t * m))
                g[:-1] += self.l2 * w[:-1]
                if np.linalg.norm(g) < self.tol:
                    break
                w -= lr * g
        self.W = W
        return self

    def decision(self, X):
        X = np.asarray(X, dtype=np.float64)
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        return Xa @ self.W.T

    def predict(self, X):
        return np.argmax(self.decision(X), axis=1)


def f1_scores(pred, truth, num_classes=None):
    """Micro and macro F1; classes with no support and no predictions score 0."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.size != truth.size or pred.size == 0:
        raise DataError("predictions and truth must align and be non-empty")
    n_classes = int(num_classes if num_classes is not None
                    else max(pred.max(), truth.max()) + 1)
    tp = np.zeros(n_classes)
    fp = np.zeros(n_classes)
    fn = np.zeros(n_classes)
    for c in range(n_classes):
        tp[c] = np.sum((pred == c) & (truth == c))
        fp[c] = np.sum((pred == c) & (truth != c))
        fn[c] = np.sum((pred != c) & (truth == c))
    denom = 2 * tp + fp + fn
    per_class = np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)
    micro = 2 * tp.sum() / max(2 * tp.sum() + fp.sum() + fn.sum(), 1e-30)
    return {"micro_f1": float(micro), "macro_f1": float(per_class.mean())}


def top_k_ids(scores, k):
    """Ids of the k largest scores, ties resolved by ascending id."""
    scores = np.asarray(scores, dtype=np.float64)
    part = np.argpartition(-scores, k - 1)[:k]
    kth_val = scores[part].min()
    sure = np.flatnonzero(scores > kth_val)
    tied = np.sort(np.flatnonzero(scores == kth_val))
    return np.concatenate([sure, tied[:k - sure.size]])


def precision_at_k(graph, k, sample_nodes, score_fn):
    """Mean fraction of a node's top-k scored candidates that are true edges.

    ``score_fn(u)`` returns a score for every node as candidate successor
    of u; u itself is excluded from its own ranking.
    """
    n = graph.num_nodes
    if k >= n:
        raise DataError(f"k={k} must be below the node count {n}")
    precisions = []
    for u in sample_nodes:
        u = int(u)
        scores = np.array(score_fn(u), dtype=np.float64)
        scores[u] = -np.inf
        top = top_k_ids(scores, k)
        if graph.kind == "hetero":
            truth = set(int(x) for x in graph.out_adj[u][:, 0])
        else:
            truth = set(int(x) for x in graph.out_adj[u])
        hits = sum(1 for t in top if int(t) in truth)
        precisions.append(hits / k)
    if not precisions:
        raise DataError("no sample nodes given for reconstruction")
    return float(np.mean(precisions))


def metric_row(task, variant, dataset, seed, params, metric, value):
    return {"task": task, "variant": variant, "dataset": dataset,
            "seed": seed, "params": params, "metric": metric,
            "value": float(value)}


def run_protocol(task, *, variant, dataset, seed, **kw):
    """Run one evaluation task and return uniform metric rows.

    lp: score held-out positives vs negatives -> one AUC row.
    nc: train the internal classifier at one or more train ratios.
    gr: precision@k over a k grid on sampled nodes.
    sparsity: delegate each ratio to ``point_fn`` and collect AUC rows.
    """
    rows = []
    if task == "lp":
        split = kw["split"]
        score_fn = kw["score_fn"]
        if split.neg_test is None:
            raise DataError("split has no negatives; run negative sampling first")
        pos = score_fn(split.pos_test)
        neg = score_fn(split.neg_test)
        rows.append(metric_row("lp", variant, dataset, seed,
                               {"gamma": split.gamma}, "auc", auc(pos, neg)))
    elif task == "nc":
        features = kw["features"]
        labels = kw["labels"]
        ratios = kw.get("ratios") or [kw.get("train_ratio", 0.8)]
        l2 = kw.get("l2", 1.0)
        X = features[labels.node_ids]
        for ratio in ratios:
            if not 0.0 < ratio < 1.0:
                raise DataError(f"train ratio must be in (0,1), got {ratio}")
            rng = np.random.default_rng(seed)
            perm = rng.permutation(labels.y.size)
            n_train = int(round(ratio * perm.size))
            if n_train == 0 or n_train == perm.size:
                raise DataError(f"train ratio {ratio} leaves an empty split")
            tr, te = perm[:n_train], perm[n_train:]
            clf = LogisticRegressionOVR(l2=l2).fit(
                X[tr], labels.y[tr], num_classes=labels.num_classes,
                class_names=labels.class_names)
            scores = f1_scores(clf.predict(X[te]), labels.y[te],
                               num_classes=labels.num_classes)
            for metric, value in scores.items():
                rows.append(metric_row("nc", variant, dataset, seed,
                                       {"train_ratio": ratio}, metric, value))
    elif task == "gr":
        graph = kw["graph"]
        score_fn = kw["score_fn"]
        k_grid = kw["k_grid"]
        sample_ratio = kw.get("sample_ratio", 0.1)
        eligible = np.flatnonzero(graph.out_degrees() > 0)
        if eligible.size == 0:
            raise DataError("no nodes with outgoing edges to reconstruct")
        rng = np.random.default_rng(seed)
        n_sample = max(1, int(round(sample_ratio * eligible.size)))
        sample = rng.choice(eligible, size=n_sample, replace=False)
        for k in k_grid:
            value = precision_at_k(graph, int(k), sample, score_fn)
            rows.append(metric_row("gr", variant, dataset, seed,
                                   {"k": int(k)}, "precision_at_k", value))
    elif task == "sparsity":
        ratios = kw["ratios"]
        point_fn = kw["point_fn"]
        for ratio in ratios:
            value = point_fn(ratio)
            rows.append(metric_row("sparsity", variant, dataset, seed,
                                   {"ratio": float(ratio)}, "auc", value))
    else:
        raise DataError(f"unknown evaluation task '{task}'")
    return rows

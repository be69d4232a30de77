"""Graph loading, id remapping, and evaluation splits.

Node names from input files are remapped to dense integer ids in first-seen
order; all arrays are indexed by those ids and the name table maps back for
output. Self-loops are dropped and duplicate edges deduplicated at load time.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError

UNDIRECTED = "undirected"
DIRECTED = "directed"
HETERO = "hetero"

_KINDS = (UNDIRECTED, DIRECTED, HETERO)


def _split_fields(line):
    # canonical separator is TAB; tolerate plain whitespace when no TAB present
    return line.split("\t") if "\t" in line else line.split()


def _parse_rows(path, n_fields, what):
    rows = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {what} file {path}: {e}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in _split_fields(line)]
            if len(parts) != n_fields:
                raise DataError(
                    f"{path}:{lineno}: expected {n_fields} fields, got {len(parts)}"
                )
            rows.append(parts)
    if not rows:
        raise DataError(f"{path}: no {what} rows found")
    return rows


class Graph:
    """In-memory graph with dense ids, sorted adjacency and an edge set.

    ``edges`` keeps parse order: columns (u, v) or, for relational graphs,
    (u, r, v). Undirected adjacency stores each edge in both endpoint lists.
    """

    def __init__(self, kind, names, edges, rel_names=None, node_types=None,
                 self_loops_dropped=0, duplicates_dropped=0):
        if kind not in _KINDS:
            raise ValueError(f"unknown graph kind '{kind}'")
        self.kind = kind
        self.names = list(names)
        self.name_to_id = {n: i for i, n in enumerate(self.names)}
        if len(self.name_to_id) != len(self.names):
            raise DataError("duplicate node names in name table")
        self.edges = np.asarray(edges, dtype=np.int64).reshape(len(edges), -1)
        self.rel_names = list(rel_names) if rel_names is not None else None
        self.node_types = None if node_types is None else np.asarray(node_types)
        self.self_loops_dropped = self_loops_dropped
        self.duplicates_dropped = duplicates_dropped
        self._build_adjacency()

    # -- construction ------------------------------------------------------

    def _build_adjacency(self):
        n = len(self.names)
        out_lists = [[] for _ in range(n)]
        in_lists = [[] for _ in range(n)]
        edge_set = set()
        if self.kind == HETERO:
            for u, r, v in self.edges:
                out_lists[u].append((v, r))
                in_lists[v].append((u, r))
                edge_set.add((int(u), int(r), int(v)))
        elif self.kind == DIRECTED:
            for u, v in self.edges:
                out_lists[u].append(v)
                in_lists[v].append(u)
                edge_set.add((int(u), int(v)))
        else:
            for u, v in self.edges:
                out_lists[u].append(v)
                out_lists[v].append(u)
                a, b = (int(u), int(v)) if u <= v else (int(v), int(u))
                edge_set.add((a, b))
            in_lists = out_lists
        if self.kind == HETERO:
            self.out_adj = [np.array(sorted(l), dtype=np.int64).reshape(-1, 2) for l in out_lists]
            self.in_adj = [np.array(sorted(l), dtype=np.int64).reshape(-1, 2) for l in in_lists]
        else:
            self.out_adj = [np.array(sorted(l), dtype=np.int64) for l in out_lists]
            if self.kind == DIRECTED:
                self.in_adj = [np.array(sorted(l), dtype=np.int64) for l in in_lists]
            else:
                self.in_adj = self.out_adj
        self.edge_set = edge_set

    # -- basic queries -----------------------------------------------------

    @property
    def num_nodes(self):
        return len(self.names)

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def num_relations(self):
        return len(self.rel_names) if self.rel_names is not None else 0

    def has_edge(self, u, v, r=None):
        if self.kind == HETERO:
            if r is None:
                raise ValueError("relational graph membership needs a relation")
            return (int(u), int(r), int(v)) in self.edge_set
        if self.kind == UNDIRECTED and u > v:
            u, v = v, u
        return (int(u), int(v)) in self.edge_set

    def neighbors(self, u):
        """Walkable successors of u (undirected neighbors or out-neighbors)."""
        if self.kind == HETERO:
            return self.out_adj[u][:, 0]
        return self.out_adj[u]

    def degrees(self):
        """Total incident edge count per node (in+out for directed graphs)."""
        n = self.num_nodes
        deg = np.zeros(n, dtype=np.int64)
        if self.num_edges == 0:
            return deg
        u = self.edges[:, 0]
        v = self.edges[:, -1]
        np.add.at(deg, u, 1)
        np.add.at(deg, v, 1)
        return deg

    def out_degrees(self):
        return np.array([len(a) for a in self.out_adj], dtype=np.int64)

    def replace_edges(self, edges):
        """New graph over the same name table with a different edge list."""
        return Graph(self.kind, self.names, edges, rel_names=self.rel_names,
                     node_types=self.node_types)


def _remap(rows, kind, u_col, v_col, r_col=None):
    names, name_to_id = [], {}
    rel_names, rel_to_id = [], {}
    edges = []
    seen = set()
    loops = dupes = 0

    def nid(tok):
        if tok not in name_to_id:
            name_to_id[tok] = len(names)
            names.append(tok)
        return name_to_id[tok]

    for parts in rows:
        u = nid(parts[u_col])
        v = nid(parts[v_col])
        if u == v:
            loops += 1
            continue
        if r_col is not None:
            tok = parts[r_col]
            if tok not in rel_to_id:
                rel_to_id[tok] = len(rel_names)
                rel_names.append(tok)
            r = rel_to_id[tok]
            key = (u, r, v)
        else:
            key = (min(u, v), max(u, v)) if kind == UNDIRECTED else (u, v)
        if key in seen:
            dupes += 1
            continue
        seen.add(key)
        edges.append((u, r, v) if r_col is not None else (u, v))
    return names, edges, rel_names, loops, dupes


def load_edge_list(path, kind):
    """Read a TAB-separated edge list ("src<TAB>dst", '#' comments allowed)."""
    if kind not in (UNDIRECTED, DIRECTED):
        raise ValueError("edge lists load as undirected or directed graphs")
    rows = _parse_rows(path, 2, "edge")
    names, edges, _, loops, dupes = _remap(rows, kind, 0, 1)
    if not edges:
        raise DataError(f"{path}: no usable edges (all were self-loops)")
    return Graph(kind, names, edges, self_loops_dropped=loops, duplicates_dropped=dupes)


def load_triples(path):
    """Read a TAB-separated triple file ("src<TAB>rel<TAB>dst")."""
    rows = _parse_rows(path, 3, "triple")
    names, edges, rel_names, loops, dupes = _remap(rows, HETERO, 0, 2, r_col=1)
    if not edges:
        raise DataError(f"{path}: no usable triples (all were self-loops)")
    return Graph(HETERO, names, edges, rel_names=rel_names,
                 self_loops_dropped=loops, duplicates_dropped=dupes)


@dataclass
class LabelSet:
    """Class labels over a subset of nodes, with dense class ids."""
    node_ids: np.ndarray
    y: np.ndarray
    class_names: list

    @property
    def num_classes(self):
        return len(self.class_names)


def load_labels(path, graph):
    """Read "node<TAB>label" rows; every node must exist in the graph."""
    rows = _parse_rows(path, 2, "label")
    node_ids, ys = [], []
    class_names, class_to_id = [], {}
    seen = set()
    for parts in rows:
        name, label = parts
        if name not in graph.name_to_id:
            raise DataError(f"{path}: labeled node '{name}' not present in graph")
        nid = graph.name_to_id[name]
        if nid in seen:
            raise DataError(f"{path}: node '{name}' labeled more than once")
        seen.add(nid)
        if label not in class_to_id:
            class_to_id[label] = len(class_names)
            class_names.append(label)
        node_ids.append(nid)
        ys.append(class_to_id[label])
    return LabelSet(np.array(node_ids, dtype=np.int64),
                    np.array(ys, dtype=np.int64), class_names)


@dataclass
class EvalSplit:
    """A held-out positive edge set plus sampled negatives for scoring."""
    train_graph: Graph
    pos_test: np.ndarray
    neg_test: Optional[np.ndarray]
    gamma: float
    seed: int


def split_edges(graph, holdout_fraction, seed, keep_connected=False):
    """Hold out a uniformly random fraction of edges as test positives.

    With ``keep_connected``, an edge whose removal would leave an endpoint
    with no remaining edges is skipped and another drawn; each inspected
    edge counts as one draw and the total is capped at |E|.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise DataError(f"holdout fraction must be in (0,1), got {holdout_fraction}")
    n_edges = graph.num_edges
    target = int(round(holdout_fraction * n_edges))
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_edges)
    deg = graph.degrees() if keep_connected else None
    held = []
    for j in order:
        if len(held) == target:
            break
        row = graph.edges[j]
        u, v = int(row[0]), int(row[-1])
        if keep_connected and (deg[u] <= 1 or deg[v] <= 1):
            continue
        if keep_connected:
            deg[u] -= 1
            deg[v] -= 1
        held.append(j)
    if len(held) < target:
        raise DataError(
            f"could only hold out {len(held)} of {target} edges "
            f"without isolating a node"
        )
    mask = np.zeros(n_edges, dtype=bool)
    mask[held] = True
    train_graph = graph.replace_edges(graph.edges[~mask])
    pos_test = graph.edges[np.array(held, dtype=np.int64)]
    return EvalSplit(train_graph, pos_test, None, 0.0, seed)


def _edge_key(graph, u, v):
    if graph.kind == UNDIRECTED and u > v:
        u, v = v, u
    return (u, v)


def make_negatives(split, graph, gamma, seed):
    """Sample one negative per held-out positive.

    For directed graphs a ``gamma`` fraction of negatives are reversals
    (v, u) of test positives, created only when (v, u) is not a true edge;
    the remainder (and everything when gamma=0) are uniform non-edge pairs.
    Undirected and relational graphs force gamma=0; relational negatives
    corrupt the tail, staying within the tail's node type when types are set.
    """
    pos = split.pos_test
    need = pos.shape[0]
    rng = np.random.default_rng(seed)

    if graph.kind == HETERO:
        if gamma != 0.0:
            raise DataError("reversal negatives are only defined for directed graphs")
        negs = []
        types = graph.node_types
        for u, r, v in pos:
            u, r, v = int(u), int(r), int(v)
            if types is not None:
                pool = np.flatnonzero(types == types[v])
            else:
                pool = None
            for _ in range(10000):
                w = int(pool[rng.integers(len(pool))]) if pool is not None else int(rng.integers(graph.num_nodes))
                if w != v and w != u and not graph.has_edge(u, w, r):
                    negs.append((u, r, w))
                    break
            else:
                raise DataError(f"no corruptible tail found for triple ({u},{r},{v})")
        neg_test = np.array(negs, dtype=np.int64)
        return EvalSplit(split.train_graph, pos, neg_test, 0.0, seed)

    if graph.kind == UNDIRECTED and gamma != 0.0:
        raise DataError("undirected graphs force gamma=0 (no edge direction to reverse)")
    if not 0.0 <= gamma <= 1.0:
        raise DataError(f"gamma must be in [0,1], got {gamma}")

    n_rev = int(round(gamma * need))
    negs = []
    used = set()
    if n_rev > 0:
        feasible = 0
        for j in rng.permutation(need):
            u, v = int(pos[j, 0]), int(pos[j, 1])
            if graph.has_edge(v, u) or (v, u) in used:
                continue
            feasible += 1
            if len(negs) < n_rev:
                negs.append((v, u))
                used.add((v, u))
        if len(negs) < n_rev:
            raise DataError(
                f"only {feasible} of {need} test positives are reversible; "
                f"max feasible gamma is {feasible / need:.3f}"
            )
    attempts = 0
    cap = 200 * need + 10000
    while len(negs) < need:
        attempts += 1
        if attempts > cap:
            raise DataError("could not sample enough non-edge negative pairs")
        u = int(rng.integers(graph.num_nodes))
        v = int(rng.integers(graph.num_nodes))
        if u == v:
            continue
        key = _edge_key(graph, u, v)
        if key in used or graph.has_edge(u, v):
            continue
        used.add(key)
        negs.append((u, v))
    neg_test = np.array(negs, dtype=np.int64)
    return EvalSplit(split.train_graph, pos, neg_test, gamma, seed)


def save_split(split, graph, path):
    """Persist a split as name-keyed rows: u, v, optional relation, pos|neg."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# gamma={split.gamma} seed={split.seed}\n")
        for tag, arr in (("pos", split.pos_test), ("neg", split.neg_test)):
            if arr is None:
                continue
            for row in arr:
                if graph.kind == HETERO:
                    u, r, v = (int(x) for x in row)
                    fh.write(f"{graph.names[u]}\t{graph.names[v]}\t{graph.rel_names[r]}\t{tag}\n")
                else:
                    u, v = int(row[0]), int(row[1])
                    fh.write(f"{graph.names[u]}\t{graph.names[v]}\t{tag}\n")


def load_split(path, graph):
    """Re-read a persisted split against the full graph it was made from."""
    gamma, seed = 0.0, 0
    pos, neg = [], []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read split file {path}: {e}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("gamma="):
                        gamma = float(tok[6:])
                    elif tok.startswith("seed="):
                        seed = int(tok[5:])
                continue
            parts = _split_fields(line)
            want = 4 if graph.kind == HETERO else 3
            if len(parts) != want:
                raise DataError(f"{path}:{lineno}: expected {want} fields, got {len(parts)}")
            tag = parts[-1]
            if tag not in ("pos", "neg"):
                raise DataError(f"{path}:{lineno}: tag must be pos or neg, got '{tag}'")
            try:
                u = graph.name_to_id[parts[0]]
                v = graph.name_to_id[parts[1]]
            except KeyError as e:
                raise DataError(f"{path}:{lineno}: unknown node {e}") from None
            if graph.kind == HETERO:
                try:
                    r = graph.rel_names.index(parts[2])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: unknown relation '{parts[2]}'") from None
                row = (u, r, v)
            else:
                row = (u, v)
            if tag == "pos":
                if graph.kind == HETERO:
                    ok = graph.has_edge(u, v, r)
                else:
                    ok = graph.has_edge(u, v)
                if not ok:
                    raise DataError(f"{path}:{lineno}: positive row is not an edge of the graph")
                pos.append(row)
            else:
                neg.append(row)
    if not pos:
        raise DataError(f"{path}: no positive rows")
    pos_arr = np.array(pos, dtype=np.int64)
    pos_set = {tuple(int(x) for x in row) for row in pos_arr}
    if graph.kind == UNDIRECTED:
        pos_set |= {(v, u) for u, v in list(pos_set)}
        keep = [i for i, e in enumerate(graph.edges)
                if (int(e[0]), int(e[1])) not in pos_set]
    elif graph.kind == DIRECTED:
        keep = [i for i, e in enumerate(graph.edges)
                if (int(e[0]), int(e[1])) not in pos_set]
    else:
        keep = [i for i, e in enumerate(graph.edges)
                if (int(e[0]), int(e[1]), int(e[2])) not in pos_set]
    train_graph = graph.replace_edges(graph.edges[np.array(keep, dtype=np.int64)])
    neg_arr = np.array(neg, dtype=np.int64) if neg else None
    return EvalSplit(train_graph, pos_arr, neg_arr, gamma, seed)


def subsample_edges(graph, keep_fraction, seed):
    """Random edge subgraph over the same node table (for sparsity sweeps)."""
    if not 0.0 < keep_fraction <= 1.0:
        raise DataError(f"keep fraction must be in (0,1], got {keep_fraction}")
    if keep_fraction == 1.0:
        return graph
    rng = np.random.default_rng(seed)
    n_keep = max(1, int(round(keep_fraction * graph.num_edges)))
    idx = np.sort(rng.choice(graph.num_edges, size=n_keep, replace=False))
    return graph.replace_edges(graph.edges[idx])

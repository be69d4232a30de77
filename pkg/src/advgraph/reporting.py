"""Run outputs: embedding text files, metric streams, CSV tables,
provenance sidecars, and the figures rendered next to them.

Embedding files follow the plain word2vec text layout: a "count dim"
header line, then one "name v1 .. vd" row per entity, floats printed
with %.17g so a reload reproduces the array bit for bit.
"""

import hashlib
import json
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError


def write_embeddings(path, names, matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(names):
        raise DataError("embedding matrix does not match the name list")
    with open(path, "w") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for name, row in zip(names, matrix):
            vals = " ".join(f"{x:.17g}" for x in row)
            fh.write(f"{name} {vals}\n")


def read_embeddings(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: malformed embedding header")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path}: malformed embedding header") from None
        names = []
        rows = np.empty((count, dim))
        for i in range(count):
            line = fh.readline()
            if not line:
                raise DataError(f"{path}: expected {count} rows, found {i}")
            parts = line.split()
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{i + 2}: expected {dim} values")
            names.append(parts[0])
            rows[i] = [float(x) for x in parts[1:]]
        if fh.readline().strip():
            raise DataError(f"{path}: more rows than the header declares")
    return names, rows


def align_embeddings(names, matrix, graph, what="node"):
    """Reorder loaded rows to graph id order; every entity must be present."""
    lookup = {n: i for i, n in enumerate(names)}
    target = graph.rel_names if what == "relation" else graph.names
    out = np.empty((len(target), matrix.shape[1]))
    for gid, name in enumerate(target):
        row = lookup.get(name)
        if row is None:
            raise DataError(f"embedding file has no row for {what} '{name}'")
        out[gid] = matrix[row]
    return out


def write_jsonl(path, rows, append=False):
    mode = "a" if append else "w"
    with open(path, mode) as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _format_cell(value):
    if isinstance(value, float):
        return f"{value:.10g}"
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True)
    return str(value)


def write_csv(path, rows, fieldnames, comment=None):
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(fieldnames) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row.get(f, "")) for f in fieldnames) + "\n")


def config_hash(config):
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_provenance(path, config, seed, version):
    record = {"config": config, "config_hash": config_hash(config),
              "seed": seed, "version": version}
    with open(path, "w") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")


def plot_series(path, rows, x_key, y_key, series_key=None,
                xlabel=None, ylabel=None, title=None):
    """Line plot of metric rows, one line per value of series_key."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if series_key is None:
        groups = {None: rows}
    else:
        groups = {}
        for row in rows:
            groups.setdefault(row.get(series_key), []).append(row)
    for label in sorted(groups, key=lambda v: (v is None, str(v))):
        pts = sorted(groups[label], key=lambda r: r[x_key])
        xs = [p[x_key] for p in pts]
        ys = [p[y_key] for p in pts]
        ax.plot(xs, ys, marker="o", markersize=3,
                label=None if label is None else f"{series_key}={label}")
    ax.set_xlabel(xlabel or x_key)
    ax.set_ylabel(ylabel or y_key)
    if title:
        ax.set_title(title)
    if series_key is not None:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_training(path, epoch_rows):
    """Discriminator and generator loss curves over epochs."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    epochs = [r["epoch"] for r in epoch_rows]
    ax.plot(epochs, [r["disc_loss"] for r in epoch_rows],
            marker="o", markersize=3, label="discriminator")
    if any(r["gen_loss"] is not None for r in epoch_rows):
        ax.plot(epochs, [r["gen_loss"] for r in epoch_rows],
                marker="s", markersize=3, label="generator")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def metric_rows_to_report(out_dir, stem, rows, x_key=None, series_key=None):
    """Write rows as JSONL plus, for sweeps, a CSV table and a figure."""
    write_jsonl(os.path.join(out_dir, f"{stem}.jsonl"), rows)
    if x_key is None or len(rows) < 2:
        return
    flat = []
    for row in rows:
        fr = {k: v for k, v in row.items() if k != "params"}
        fr.update(row["params"])
        flat.append(fr)
    fields = ["task", "variant", "dataset", "seed"]
    fields += sorted(set(k for r in flat for k in r) - set(fields) - {"metric", "value"})
    fields += ["metric", "value"]
    write_csv(os.path.join(out_dir, f"{stem}.csv"), flat, fields)
    ylabel = "value" if series_key == "metric" else flat[0]["metric"]
    plot_series(os.path.join(out_dir, f"{stem}.png"), flat, x_key, "value",
                series_key=series_key, ylabel=ylabel)

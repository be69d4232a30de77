"""Alternating training loop shared by all variants, plus checkpoints.

Each epoch runs n_d discriminator passes then n_g generator passes; a pass
covers the variant's unit set once in shuffled minibatches, and the whole
pass repeats n_s times so every unit draws n_s fresh fakes per iteration.
Randomness is split into fixed per-phase streams derived from the seed, so
runs replay bit-exactly and the phases cannot perturb each other.
"""

import struct
import time
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .nn import make_optimizer

PHASE_INIT, PHASE_CORPUS, PHASE_DISC, PHASE_GEN, PHASE_EVAL = range(5)


def phase_rng(seed, phase):
    """Independent, reproducible generator for one phase of a seeded run."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(phase),)))


@dataclass
class TrainConfig:
    n_epoch: int
    n_d: int = 15
    n_g: int = 5
    n_s: int = 1
    batch_size: int = 512
    lam: float = 1.0
    dim: int = 128
    seed: int = 0
    optimizer: str = "adam"
    lr: float = 1e-3
    neg_k: int = 5

    def __post_init__(self):
        if self.n_epoch < 0:
            raise ValueError("n_epoch must be >= 0")
        for name in ("n_d", "n_g", "n_s", "batch_size", "dim", "neg_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lam < 0.0:
            raise ValueError("lambda must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer '{self.optimizer}'")
        if self.lr <= 0.0:
            raise ValueError("learning rate must be positive")


@dataclass
class TrainReport:
    epochs: list
    n_disc_updates: int
    n_gen_updates: int


def train(model, cfg, epoch_callback=None):
    """Run Algorithm-style alternating updates; returns per-epoch rows."""
    disc_rng = phase_rng(cfg.seed, PHASE_DISC)
    gen_rng = phase_rng(cfg.seed, PHASE_GEN)
    disc_opt = make_optimizer(cfg.optimizer, cfg.lr)
    gen_opt = make_optimizer(cfg.optimizer, cfg.lr)
    rows = []
    n_disc = n_gen = 0
    for epoch in range(cfg.n_epoch):
        t0 = time.perf_counter()
        d_sum, d_units = 0.0, 0
        for it in range(cfg.n_d):
            for _ in range(cfg.n_s):
                for batch in model.disc_batches(disc_rng, cfg.batch_size):
                    loss, grads, n_units = model.disc_step(batch, disc_rng)
                    loss = float(loss)
                    if not np.isfinite(loss):
                        raise NumericError(
                            f"non-finite discriminator loss at epoch {epoch}, pass {it}")
                    disc_opt.update(model.disc_params(), grads)
                    model.post_disc_update()
                    d_sum += loss * n_units
                    d_units += n_units
        n_disc += d_units

        g_sum, g_units = 0.0, 0
        if model.adversarial_enabled:
            for it in range(cfg.n_g):
                for _ in range(cfg.n_s):
                    for batch in model.gen_batches(gen_rng, cfg.batch_size):
                        loss, grads, n_units = model.gen_step(batch, gen_rng)
                        loss = float(loss)
                        if not np.isfinite(loss):
                            raise NumericError(
                                f"non-finite generator loss at epoch {epoch}, pass {it}")
                        gen_opt.update(model.gen_params(), grads)
                        model.post_gen_update()
                        g_sum += loss * n_units
                        g_units += n_units
        n_gen += g_units

        row = {
            "epoch": epoch,
            "disc_loss": d_sum / d_units if d_units else None,
            "gen_loss": g_sum / g_units if g_units else None,
            "wall_time_s": time.perf_counter() - t0,
            "n_disc_updates": n_disc,
            "n_gen_updates": n_gen,
        }
        rows.append(row)
        if epoch_callback is not None:
            epoch_callback(row)
    return TrainReport(rows, n_disc, n_gen)


# -- checkpoints ----------------------------------------------------------

MAGIC = b"AGE1"
VERSION = 1


@dataclass
class Checkpoint:
    variant: str
    dim: int
    num_nodes: int
    num_relations: int
    tables: dict


def _write_str(fh, s):
    b = s.encode("utf-8")
    fh.write(struct.pack("<I", len(b)))
    fh.write(b)


def _read_exact(fh, n):
    b = fh.read(n)
    if len(b) != n:
        raise DataError("truncated checkpoint file")
    return b


def _read_str(fh):
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, n).decode("utf-8")


def save_checkpoint(model, path):
    """Versioned binary dump of every parameter table, row-major float64."""
    tables = model.all_tables()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_str(fh, model.variant)
        fh.write(struct.pack("<III", model.dim, model.graph.num_nodes,
                             getattr(model.graph, "num_relations", 0)))
        fh.write(struct.pack("<I", len(tables)))
        for name, arr in tables.items():
            _write_str(fh, name)
            arr = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path, model=None):
    """Read a checkpoint; if a model is given, restore and return it."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise DataError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        variant = _read_str(fh)
        dim, num_nodes, num_rel = struct.unpack("<III", _read_exact(fh, 12))
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        tables = {}
        for _ in range(count):
            name = _read_str(fh)
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            n_items = int(np.prod(shape)) if ndim else 1
            data = _read_exact(fh, 8 * n_items)
            tables[name] = np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(shape)
    ck = Checkpoint(variant, dim, num_nodes, num_rel, tables)
    if model is None:
        return ck
    if ck.dim != model.dim:
        raise DataError(f"checkpoint dim {ck.dim} does not match configured dim {model.dim}")
    if ck.variant != model.variant:
        raise DataError(f"checkpoint variant '{ck.variant}' does not match '{model.variant}'")
    if ck.num_nodes != model.graph.num_nodes:
        raise DataError(f"checkpoint has {ck.num_nodes} nodes, graph has {model.graph.num_nodes}")
    model.load_tables(ck.tables)
    return model

"""Command line entry points: train, evaluate, reconstruct, sweep, check-grad.

Exit codes: 0 success, 1 configuration error (bad flags, bad config file,
wrong input kind for a variant), 2 data error (unreadable or inconsistent
files), 3 numeric error (divergence or a failed gradient check).

A config file holds "key=value" lines; keys are long flag names with dashes
replaced by underscores. Command line flags override file values, and
unknown keys are rejected rather than ignored.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from . import evaluation as ev
from . import graphs as G
from . import reporting as rep
from .errors import ConfigError, DataError, NumericError
from .gradcheck import run_all
from .models import VARIANTS, build_model
from .models.directed import lp_score as dg_lp_score
from .models.hetero import triple_scores
from .models.undirected import lp_score as ug_lp_score
from .sampling import WalkConfig
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _graph_kind(variant):
    if variant.startswith("ug"):
        return G.UNDIRECTED
    if variant.startswith("dg"):
        return G.DIRECTED
    return G.HETERO


def _load_graph(args):
    kind = _graph_kind(args.variant)
    if kind == G.HETERO:
        if not getattr(args, "triples", None):
            raise ConfigError(f"variant {args.variant} trains on triples; pass --triples")
        if getattr(args, "edges", None):
            raise ConfigError(f"variant {args.variant} takes --triples, not --edges")
        return G.load_triples(args.triples), _dataset_name(args.triples)
    if not getattr(args, "edges", None):
        raise ConfigError(f"variant {args.variant} trains on an edge list; pass --edges")
    if getattr(args, "triples", None):
        raise ConfigError(f"variant {args.variant} takes --edges, not --triples")
    return G.load_edge_list(args.edges, kind), _dataset_name(args.edges)


def _dataset_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def _train_config(args):
    try:
        return TrainConfig(n_epoch=args.epochs, n_d=args.n_d, n_g=args.n_g,
                           n_s=args.n_s, batch_size=args.batch_size,
                           lam=args.lam, dim=args.dim, seed=args.seed,
                           optimizer=args.optimizer, lr=args.lr,
                           neg_k=args.neg_k)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _build(args, graph, cfg):
    try:
        walk_cfg = WalkConfig(num_walks=args.num_walks,
                              walk_length=args.walk_length,
                              window=args.window, p=args.p, q=args.q)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    try:
        return build_model(args.variant, graph, cfg, walk_cfg=walk_cfg,
                           margin=args.margin, norm=args.norm,
                           gen_flip_sign=args.gen_flip_sign,
                           hidden=args.hidden, activation=args.activation)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _args_config(args):
    """Flat, hashable view of the run configuration for provenance."""
    skip = {"func", "config", "out", "quiet", "command"}
    return {k: v for k, v in sorted(vars(args).items())
            if k not in skip and not callable(v)}


def _parse_floats(text, what):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be a comma list of numbers, got '{text}'") from None


def _parse_ints(text, what):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be a comma list of integers, got '{text}'") from None


def _model_scorer(model):
    """Pair/triple scorer reading the live model tables."""
    v = model.variant
    if v.startswith("ug"):
        return lambda pairs: ug_lp_score(model.center, pairs)
    if v.startswith("dg"):
        return lambda pairs: dg_lp_score(model.s, model.t, pairs)
    return model.score_triples


def _write_model_outputs(model, graph, out_dir):
    for name, mat in model.embeddings_out().items():
        names = graph.rel_names if name == "relation" else graph.names
        rep.write_embeddings(os.path.join(out_dir, f"{name}.emb"), names, mat)
    if model.variant.startswith("dg"):
        rep.write_embeddings(os.path.join(out_dir, "concat.emb"), graph.names,
                             np.hstack([model.s, model.t]))
    save_checkpoint(model, os.path.join(out_dir, "checkpoint.bin"))


def _note_threads(args):
    if getattr(args, "threads", 1) != 1:
        print("note: this reference implementation runs single-threaded; "
              "--threads is recorded in provenance only", file=sys.stderr)


# -- train ------------------------------------------------------------------


def cmd_train(args):
    graph, _ = _load_graph(args)
    _note_threads(args)
    os.makedirs(args.out, exist_ok=True)

    if args.holdout > 0.0:
        split = G.split_edges(graph, args.holdout, args.seed,
                              keep_connected=args.keep_connected)
        split = G.make_negatives(split, graph, args.gamma, args.seed)
        G.save_split(split, graph, os.path.join(args.out, "split.tsv"))
        train_graph = split.train_graph
    else:
        train_graph = graph

    cfg = _train_config(args)
    model = _build(args, train_graph, cfg)

    log_path = os.path.join(args.out, "train_log.jsonl")
    open(log_path, "w").close()

    def on_epoch(row):
        rep.write_jsonl(log_path, [row], append=True)
        if not args.quiet:
            gl = "-" if row["gen_loss"] is None else f"{row['gen_loss']:.5f}"
            print(f"epoch {row['epoch']:3d}  disc {row['disc_loss']:.5f}  "
                  f"gen {gl}  ({row['wall_time_s']:.1f}s)")

    report = train(model, cfg, epoch_callback=on_epoch)

    _write_model_outputs(model, train_graph, args.out)
    if report.epochs:
        rep.plot_training(os.path.join(args.out, "training.png"), report.epochs)
    rep.write_provenance(os.path.join(args.out, "provenance.json"),
                         _args_config(args), args.seed, __version__)
    if not args.quiet:
        print(f"done: {report.n_disc_updates} discriminator updates, "
              f"{report.n_gen_updates} generator updates -> {args.out}")


# -- evaluate -----------------------------------------------------------------


def _lp_scorer_from_files(args, graph):
    v = args.variant
    mdir = args.model
    if v.startswith("ug"):
        names, mat = rep.read_embeddings(os.path.join(mdir, "center.emb"))
        center = rep.align_embeddings(names, mat, graph)
        return lambda pairs: ug_lp_score(center, pairs)
    if v.startswith("dg"):
        s = rep.align_embeddings(*rep.read_embeddings(os.path.join(mdir, "source.emb")), graph)
        t = rep.align_embeddings(*rep.read_embeddings(os.path.join(mdir, "target.emb")), graph)
        return lambda pairs: dg_lp_score(s, t, pairs)
    ck = load_checkpoint(os.path.join(mdir, "checkpoint.bin"))
    if ck.variant != v:
        raise ConfigError(f"checkpoint was trained as '{ck.variant}', not '{v}'")
    tabs = {k[5:]: arr for k, arr in ck.tables.items() if k.startswith("disc.")}
    flavor = v.split("-")[1]
    return lambda triples: triple_scores(tabs, flavor, args.margin, args.norm, triples)


def _features_from_files(args, graph):
    v = args.variant
    mdir = args.model
    if v.startswith("ug"):
        name = "center.emb"
    elif v.startswith("dg"):
        name = "concat.emb"
    else:
        ck = load_checkpoint(os.path.join(mdir, "checkpoint.bin"))
        return ck.tables["disc.node"]
    names, mat = rep.read_embeddings(os.path.join(mdir, name))
    return rep.align_embeddings(names, mat, graph)


def cmd_evaluate(args):
    graph, dataset = _load_graph(args)
    out_dir = args.out or args.model
    os.makedirs(out_dir, exist_ok=True)
    common = dict(variant=args.variant, dataset=dataset, seed=args.seed)

    if args.task == "lp":
        if not args.split:
            raise ConfigError("link prediction needs --split (written by train --holdout)")
        split = G.load_split(args.split, graph)
        score_fn = _lp_scorer_from_files(args, graph)
        rows = []
        if args.gammas:
            for gm in _parse_floats(args.gammas, "--gammas"):
                resampled = G.make_negatives(split, graph, gm, args.seed)
                rows += ev.run_protocol("lp", split=resampled, score_fn=score_fn, **common)
        else:
            if split.neg_test is None:
                split = G.make_negatives(split, graph, 0.0, args.seed)
            rows = ev.run_protocol("lp", split=split, score_fn=score_fn, **common)
        rep.metric_rows_to_report(out_dir, "metrics", rows, x_key="gamma")
    else:
        if not args.labels:
            raise ConfigError("node classification needs --labels")
        labels = G.load_labels(args.labels, graph)
        features = _features_from_files(args, graph)
        ratios = (_parse_floats(args.ratios, "--ratios") if args.ratios
                  else [args.train_ratio])
        rows = ev.run_protocol("nc", features=features, labels=labels,
                               ratios=ratios, l2=args.l2, **common)
        rep.metric_rows_to_report(out_dir, "metrics", rows,
                                  x_key="train_ratio", series_key="metric")

    if args.quiet:
        return 0
    for row in rows:
        print(f"{row['task']} {row['metric']} {row['params']}: {row['value']:.4f}")


# -- reconstruct --------------------------------------------------------------


def cmd_reconstruct(args):
    if _graph_kind(args.variant) == G.HETERO:
        raise ConfigError("reconstruction scores node pairs; use a ug or dg variant")
    graph, dataset = _load_graph(args)
    out_dir = args.out or args.model
    os.makedirs(out_dir, exist_ok=True)
    v = args.variant
    if v.startswith("ug"):
        names, mat = rep.read_embeddings(os.path.join(args.model, "center.emb"))
        center = rep.align_embeddings(names, mat, graph)
        score_fn = lambda u: center @ center[u]
    else:
        s = rep.align_embeddings(*rep.read_embeddings(os.path.join(args.model, "source.emb")), graph)
        t = rep.align_embeddings(*rep.read_embeddings(os.path.join(args.model, "target.emb")), graph)
        score_fn = lambda u: t @ s[u]
    ks = _parse_ints(args.ks, "--ks")
    rows = ev.run_protocol("gr", graph=graph, score_fn=score_fn, k_grid=ks,
                           sample_ratio=args.sample_ratio, variant=v,
                           dataset=dataset, seed=args.seed)
    rep.metric_rows_to_report(out_dir, "reconstruction", rows, x_key="k")
    if args.quiet:
        return 0
    for row in rows:
        print(f"precision@{row['params']['k']}: {row['value']:.4f}")


# -- sweep --------------------------------------------------------------------


def cmd_sweep(args):
    graph, dataset = _load_graph(args)
    _note_threads(args)
    os.makedirs(args.out, exist_ok=True)
    split = G.split_edges(graph, args.holdout, args.seed,
                          keep_connected=args.keep_connected)
    common = dict(variant=args.variant, dataset=dataset, seed=args.seed)
    cfg = _train_config(args)

    if args.sweep == "gamma":
        if not args.variant.startswith("dg"):
            raise ConfigError("the gamma sweep needs a directed variant")
        model = _build(args, split.train_graph, cfg)
        train(model, cfg)
        score_fn = _model_scorer(model)
        rows = []
        for gm in _parse_floats(args.gammas, "--gammas"):
            resampled = G.make_negatives(split, graph, gm, args.seed)
            rows += ev.run_protocol("lp", split=resampled, score_fn=score_fn, **common)
        x_key = "gamma"
    else:
        base = G.make_negatives(split, graph, args.gamma, args.seed)

        def point_fn(ratio):
            sub = G.subsample_edges(split.train_graph, ratio, args.seed)
            model = _build(args, sub, cfg)
            train(model, cfg)
            score_fn = _model_scorer(model)
            if not args.quiet:
                print(f"ratio {ratio:.2f} trained")
            return ev.auc(score_fn(base.pos_test), score_fn(base.neg_test))

        ratios = _parse_floats(args.ratios, "--ratios")
        rows = ev.run_protocol("sparsity", ratios=ratios, point_fn=point_fn, **common)
        x_key = "ratio"

    rep.metric_rows_to_report(args.out, "sweep", rows, x_key=x_key)
    rep.write_provenance(os.path.join(args.out, "provenance.json"),
                         _args_config(args), args.seed, __version__)
    if args.quiet:
        return 0
    for row in rows:
        print(f"{row['params']}: auc {row['value']:.4f}")


# -- check-grad ---------------------------------------------------------------


def cmd_check_grad(args):
    variants = args.variants.split(",") if args.variants else None
    if variants:
        for v in variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant '{v}'")
    results = run_all(variants=variants, tol=args.tol,
                      inject_fault=args.inject_sign_flip)
    n_fail = 0
    for variant, op, err, ok in results:
        n_fail += 0 if ok else 1
        print(f"{'ok  ' if ok else 'FAIL'} {variant:8s} {op:14s} max rel err {err:.3g}")
    print(f"{len(results) - n_fail}/{len(results)} gradient checks passed")
    if n_fail:
        raise NumericError(f"{n_fail} gradient checks failed")


# -- parser -------------------------------------------------------------------


def _add_io(p):
    p.add_argument("--config", metavar="FILE",
                   help="key=value file; flags override its values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")


def _add_inputs(p):
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--edges", metavar="FILE", help="edge list, one 'u v' per line")
    p.add_argument("--triples", metavar="FILE", help="'head rel tail' rows")


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--n-d", type=int, default=15, help="discriminator passes per epoch")
    p.add_argument("--n-g", type=int, default=5, help="generator passes per epoch")
    p.add_argument("--n-s", type=int, default=1, help="fresh fake rounds per pass")
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--lam", type=float, default=1.0,
                   help="adversarial weight; 0 trains structure only")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--neg-k", type=int, default=5, help="negative samples per pair")
    p.add_argument("--num-walks", type=int, default=10)
    p.add_argument("--walk-length", type=int, default=80)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--p", type=float, default=1.0, help="walk return parameter")
    p.add_argument("--q", type=float, default=1.0, help="walk in-out parameter")
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--norm", choices=("l1", "l2"), default="l2")
    p.add_argument("--gen-flip-sign", action="store_true",
                   help="negate the generator objective (ablation)")
    p.add_argument("--hidden", type=int, default=None,
                   help="generator hidden width (default: embedding dim)")
    p.add_argument("--activation", choices=("tanh", "relu"), default="tanh")
    p.add_argument("--threads", type=int, default=1,
                   help="recorded in provenance; execution is single-threaded")


def build_parser():
    parser = _Parser(prog="advgraph",
                     description="Adversarial graph embeddings with gaussian fake neighbors.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="command",
                                 parser_class=_Parser)
    subs.required = True
    cmd_parsers = {}

    p = subs.add_parser("train", help="embed a graph and write model files")
    _add_io(p)
    _add_inputs(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="hold out this edge fraction and write split.tsv")
    p.add_argument("--gamma", type=float, default=0.0,
                   help="reversal fraction for held-out negatives (directed)")
    p.add_argument("--keep-connected", action="store_true",
                   help="never isolate a node when holding out edges")
    p.set_defaults(func=cmd_train)
    cmd_parsers["train"] = p

    p = subs.add_parser("evaluate", help="score a trained model on lp or nc")
    _add_io(p)
    _add_inputs(p)
    p.add_argument("--task", required=True, choices=("lp", "nc"))
    p.add_argument("--model", required=True, metavar="DIR",
                   help="directory written by train")
    p.add_argument("--out", metavar="DIR", help="default: the model directory")
    p.add_argument("--split", metavar="FILE", help="held-out edges (lp)")
    p.add_argument("--gammas", metavar="LIST",
                   help="comma list; resample negatives per gamma (lp, directed)")
    p.add_argument("--labels", metavar="FILE", help="'node label' rows (nc)")
    p.add_argument("--train-ratio", type=float, default=0.8)
    p.add_argument("--ratios", metavar="LIST", help="comma list of train ratios (nc)")
    p.add_argument("--l2", type=float, default=1.0, help="classifier ridge weight")
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--norm", choices=("l1", "l2"), default="l2")
    p.set_defaults(func=cmd_evaluate)
    cmd_parsers["evaluate"] = p

    p = subs.add_parser("reconstruct", help="precision@k of edge reconstruction")
    _add_io(p)
    _add_inputs(p)
    p.add_argument("--model", required=True, metavar="DIR")
    p.add_argument("--out", metavar="DIR", help="default: the model directory")
    p.add_argument("--ks", default="10,100", metavar="LIST")
    p.add_argument("--sample-ratio", type=float, default=0.1,
                   help="fraction of source nodes to rank")
    p.set_defaults(func=cmd_reconstruct)
    cmd_parsers["reconstruct"] = p

    p = subs.add_parser("sweep", help="train across sparsity ratios or score across gammas")
    _add_io(p)
    _add_inputs(p)
    _add_train_flags(p)
    p.add_argument("--sweep", required=True, choices=("sparsity", "gamma"))
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--keep-connected", action="store_true")
    p.add_argument("--gamma", type=float, default=0.0,
                   help="negative mix for the sparsity sweep")
    p.add_argument("--gammas", default="0,0.5,1", metavar="LIST")
    p.add_argument("--ratios", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
                   metavar="LIST")
    p.set_defaults(func=cmd_sweep)
    cmd_parsers["sweep"] = p

    p = subs.add_parser("check-grad", help="finite-difference check of every loss gradient")
    _add_io(p)
    p.add_argument("--variants", metavar="LIST", help="comma list (default: all)")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--inject-sign-flip", metavar="VARIANT:OP", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check_grad)
    cmd_parsers["check-grad"] = p

    return parser, cmd_parsers


def _read_config_file(path):
    values = {}
    try:
        fh = open(path)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _parse_bool(raw, key):
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"config key '{key}' expects a boolean, got '{raw}'")


def _apply_config(sub, values):
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config", "func"):
            raise ConfigError(f"unknown config key '{key}'")
        if action.const is True:
            defaults[key] = _parse_bool(raw, key)
        elif action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except ValueError:
                raise ConfigError(f"config key '{key}': bad value '{raw}'") from None
        else:
            defaults[key] = raw
        action.required = False
    sub.set_defaults(**defaults)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, cmd_parsers = build_parser()
        if "--config" in argv:
            idx = argv.index("--config")
            if idx + 1 >= len(argv):
                raise ConfigError("--config needs a file path")
            command = next((a for a in argv if not a.startswith("-")), None)
            sub = cmd_parsers.get(command)
            if sub is None:
                raise ConfigError("--config requires a command")
            _apply_config(sub, _read_config_file(argv[idx + 1]))
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Model variants and the registry the CLI trains through."""

from ..errors import ConfigError
from .. import graphs as G

VARIANTS = ("ug-dw", "ug-nv", "dg", "dg-star", "hin-te", "hin-th", "hin-td")


def build_model(variant, graph, cfg, walk_cfg=None, margin=1.0, norm="l2",
                gen_flip_sign=False, hidden=None, activation="tanh"):
    """Construct the model for a variant, checking the graph kind fits."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant '{variant}' (choose from {', '.join(VARIANTS)})")
    if variant.startswith("ug"):
        if graph.kind != G.UNDIRECTED:
            raise ConfigError(f"variant {variant} needs an undirected graph, got {graph.kind}")
        from .undirected import SkipGramModel
        return SkipGramModel(graph, cfg, walk_cfg=walk_cfg, biased=(variant == "ug-nv"),
                             hidden=hidden, activation=activation, variant=variant)
    if variant in ("dg", "dg-star"):
        if graph.kind != G.DIRECTED:
            raise ConfigError(f"variant {variant} needs a directed graph, got {graph.kind}")
        from .directed import SourceTargetModel
        return SourceTargetModel(graph, cfg, star=(variant == "dg-star"),
                                 hidden=hidden, activation=activation, variant=variant)
    if graph.kind != G.HETERO:
        raise ConfigError(f"variant {variant} needs a relational graph (triples), got {graph.kind}")
    from .hetero import TranslationModel
    return TranslationModel(graph, cfg, flavor=variant.split("-")[1], margin=margin,
                            norm=norm, gen_flip_sign=gen_flip_sign, hidden=hidden,
                            activation=activation, variant=variant)

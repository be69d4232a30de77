"""Adversarial graph embedding toolkit.

Learns node embeddings by pitting a structure-preserving discriminator
against a generator that samples fake neighbors from a learnable Gaussian.
Supports undirected skip-gram variants, a directed source/target variant,
and translation-based variants for relational (knowledge) graphs.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericError

__all__ = ["ConfigError", "DataError", "NumericError", "__version__"]

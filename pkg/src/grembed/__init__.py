"""Graph representation learning toolkit.

Node embeddings (factorization, random-walk, autoencoder, and
neighborhood-aggregation families), structural role signatures,
subgraph embeddings, multiscale training, and a seeded evaluation
harness, all on top of a small numpy autodiff core.
"""

from .graph import Graph, disjoint_union, load_edge_list, export_edge_list
from .errors import (
    GrembedError,
    EdgeListParseError,
    ValidationError,
    ShapeError,
    ContractError,
    NumericError,
    ResourceLimitError,
    ConvergenceError,
    ConfigError,
)

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "disjoint_union",
    "load_edge_list",
    "export_edge_list",
    "GrembedError",
    "EdgeListParseError",
    "ValidationError",
    "ShapeError",
    "ContractError",
    "NumericError",
    "ResourceLimitError",
    "ConvergenceError",
    "ConfigError",
    "__version__",
]

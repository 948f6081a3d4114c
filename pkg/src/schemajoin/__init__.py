"""Schema integration with edit-distance and knowledge-graph similarity joins."""
from .cluster import ClusterRegistry, ClusterSet
from .ed_join import ed_join
from .errors import (
    DataError,
    NormalizationError,
    NotFound,
    ParameterError,
    SchemaJoinError,
    StateCorruption,
)
from .kb import KnowledgeGraph, NeighborTable, bucket_hash, build_neighbor_table, compose_neighbors, ingest_edges
from .normalize import Dictionaries, normalize_attribute, select_keyword
from .pipeline import (
    Attribute,
    IntegrationParams,
    IntegrationState,
    KnowledgeBase,
    Schema,
    batch_integrate,
    incremental_integrate,
)
from .resolve import DistancePolicy, ResolveConfig, split_members, value_verify
from .semantic_join import ConceptMatcher, expand_paths, semantic_join
from .text import edit_distance, qgrams

__version__ = "0.1.0"

__all__ = [
    "Attribute",
    "ClusterRegistry",
    "ClusterSet",
    "ConceptMatcher",
    "DataError",
    "Dictionaries",
    "DistancePolicy",
    "IntegrationParams",
    "IntegrationState",
    "KnowledgeBase",
    "KnowledgeGraph",
    "NeighborTable",
    "NormalizationError",
    "NotFound",
    "ParameterError",
    "ResolveConfig",
    "Schema",
    "SchemaJoinError",
    "StateCorruption",
    "batch_integrate",
    "bucket_hash",
    "build_neighbor_table",
    "compose_neighbors",
    "ed_join",
    "edit_distance",
    "expand_paths",
    "incremental_integrate",
    "ingest_edges",
    "normalize_attribute",
    "qgrams",
    "select_keyword",
    "semantic_join",
    "split_members",
    "value_verify",
]

"""Hybrid lexical+vector retrieval with rank fusion and runtime filters."""

from .executor import HybridCounters, HybridResult, execute_hybrid
from .filters import RuntimeFilter, build_runtime_filter
from .fusion import DEFAULT_RRF_K, FusionSpec, fuse, fuse_rrf, fuse_score
from .retrieval import LegCounters, RankedList, text_topk, tokenize, vector_topk

__all__ = [
    "HybridCounters",
    "HybridResult",
    "execute_hybrid",
    "RuntimeFilter",
    "build_runtime_filter",
    "DEFAULT_RRF_K",
    "FusionSpec",
    "fuse",
    "fuse_rrf",
    "fuse_score",
    "LegCounters",
    "RankedList",
    "text_topk",
    "tokenize",
    "vector_topk",
]

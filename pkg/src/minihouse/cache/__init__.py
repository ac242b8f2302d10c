"""Two-tier cache plane: compute-side regions/buffers over a shared chunk
cache over a directory-backed remote store, simulated in one process."""

from .local import BufferFrame, BufferPool, MetadataManager, Region, RegionManager
from .plane import TIERS, CachePlane, TierStats
from .ring import HashRing
from .shared import CacheNode, DirectoryBackend, SharedChunkCache

__all__ = [
    "BufferFrame",
    "BufferPool",
    "MetadataManager",
    "Region",
    "RegionManager",
    "TIERS",
    "CachePlane",
    "TierStats",
    "HashRing",
    "CacheNode",
    "DirectoryBackend",
    "SharedChunkCache",
]

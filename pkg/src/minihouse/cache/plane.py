"""The assembled two-tier cache plane.

Reads resolve buffer pool -> local regions -> shared chunk cache ->
backend, each miss populating the tier above; requests are expanded to
segment-aligned units and answered as one coalesced byte string. The
returned bytes are always identical to the backend's regardless of cache
configuration — only the counters differ.
"""

from dataclasses import dataclass
from typing import Dict

from ..errors import IoError
from .local import (
    DEFAULT_REGION_BYTES,
    DEFAULT_SEGMENT_BYTES,
    BufferPool,
    MetadataManager,
    RegionManager,
)
from .shared import (
    DEFAULT_BLOCK_BYTES,
    DEFAULT_CHUNK_BYTES,
    DirectoryBackend,
    SharedChunkCache,
)

TIERS = ("buffer", "region", "shared", "backend")


@dataclass
class TierStats:
    hits: int = 0
    misses: int = 0
    bytes_served: int = 0


class CachePlane:
    def __init__(
        self,
        backend_root,
        nodes=4,
        block_bytes=DEFAULT_BLOCK_BYTES,
        chunk_bytes=DEFAULT_CHUNK_BYTES,
        region_bytes=DEFAULT_REGION_BYTES,
        segment_bytes=DEFAULT_SEGMENT_BYTES,
        region_capacity=64,
        buffer_frames=32,
        vnodes=64,
    ):
        if chunk_bytes % segment_bytes:
            raise IoError("chunk size must be a multiple of the segment size")
        self.backend = DirectoryBackend(backend_root)
        self.shared = SharedChunkCache(self.backend, nodes, block_bytes, chunk_bytes, vnodes)
        self.regions = RegionManager(region_bytes, segment_bytes, region_capacity)
        self.buffers = BufferPool(buffer_frames)
        self.meta = MetadataManager()
        self.segment_bytes = segment_bytes
        self.tiers: Dict[str, TierStats] = {t: TierStats() for t in TIERS}
        self.requests = 0
        self.bytes_requested = 0

    # --- read path ---

    def read_range(self, path, offset, length):
        """Coalesced read; always byte-equal to the backend contents."""
        size = self.shared.size(path)
        if offset < 0 or length < 0 or offset + length > size:
            raise IoError(f"range [{offset}, {offset + length}) outside {path!r} of {size} bytes")
        self.requests += 1
        self.bytes_requested += length
        if length == 0:
            return b""
        seg = self.segment_bytes
        first = offset // seg
        last = (offset + length - 1) // seg
        parts = []
        for si in range(first, last + 1):
            sstart = si * seg
            want_from = max(offset, sstart) - sstart
            want_to = min(offset + length, sstart + seg) - sstart
            data, tier = self._segment(path, si, size)
            st = self.tiers[tier]
            st.bytes_served += want_to - want_from
            parts.append(data[want_from:want_to])
        return b"".join(parts)

    def _segment(self, path, si, size):
        """One segment's bytes plus the tier that supplied them."""
        frame = self.buffers.get(path, si)
        if frame is not None:
            self.tiers["buffer"].hits += 1
            return frame.data, "buffer"
        self.tiers["buffer"].misses += 1

        data = self.regions.get_segment(path, si)
        if data is not None:
            self.tiers["region"].hits += 1
            self.buffers.put(path, si, data)
            return data, "region"
        self.tiers["region"].misses += 1

        sstart = si * self.segment_bytes
        slen = min(self.segment_bytes, size - sstart)
        io = {}
        data = self.shared.read(path, sstart, slen, io)
        backend_bytes = io.get("backend_bytes", 0)
        if backend_bytes:
            self.tiers["shared"].misses += 1
            self.tiers["backend"].hits += 1
            tier = "backend"
        else:
            self.tiers["shared"].hits += 1
            tier = "shared"
        self.regions.put_segment(path, si, data)
        self.buffers.put(path, si, data)
        self.meta.record(path, si, {"region": si // self.regions.segments_per_region})
        return data, tier

    # --- write path ---

    def write_file(self, path, data, fail_before_concat=False):
        self.shared.write_file(path, data, fail_before_concat=fail_before_concat)
        self.regions.invalidate(path)
        self.buffers.invalidate(path)
        self.meta.forget(path)

    # --- maintenance / stats ---

    def evict_tick(self):
        """Force one eviction per tier; returns the victims."""
        return {
            "region": self.regions.evict_one(),
            "buffer": self.buffers.evict_one(),
        }

    def stats(self):
        """Per-tier counters; byte counters balance exactly:
        sum of tier bytes_served == total bytes requested."""
        out = {
            tier: {
                "hits": st.hits,
                "misses": st.misses,
                "bytes_served": st.bytes_served,
            }
            for tier, st in self.tiers.items()
        }
        out["backend"]["bytes_from_backend"] = self.backend.bytes_read
        out["evictions"] = {
            "region": self.regions.evictions,
            "buffer": self.buffers.evictions,
        }
        out["requests"] = self.requests
        out["bytes_requested"] = self.bytes_requested
        return out

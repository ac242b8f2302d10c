"""Compute-side cache tiers: fixed-size disk regions with FIFO eviction,
a segment-aligned buffer pool with second-chance (clock) replacement, and
a two-level-hash metadata map with lossless serialization of inactive
entries."""

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Tuple

from ..errors import AllPinned

KB = 1 << 10
DEFAULT_REGION_BYTES = 1024 * KB
DEFAULT_SEGMENT_BYTES = 128 * KB


@dataclass
class Region:
    """One fixed-size cache region holding consecutive segments of a file."""

    path: str
    index: int  # region index within the file
    segments: Dict[int, bytes] = field(default_factory=dict)  # local slot -> bytes
    admitted_at: int = 0


class RegionManager:
    """FIFO-evicted pool of fixed-size regions (admission order wins)."""

    def __init__(self, region_bytes=DEFAULT_REGION_BYTES, segment_bytes=DEFAULT_SEGMENT_BYTES, capacity=64):
        if region_bytes % segment_bytes:
            raise ValueError("region size must be a multiple of the segment size")
        self.region_bytes = region_bytes
        self.segment_bytes = segment_bytes
        self.segments_per_region = region_bytes // segment_bytes
        self.capacity = capacity
        self.regions: "OrderedDict[Tuple[str, int], Region]" = OrderedDict()
        self._admissions = 0
        self.evictions = 0

    def _locate(self, path, seg_index):
        ri, slot = divmod(seg_index, self.segments_per_region)
        return (path, ri), slot

    def get_segment(self, path, seg_index):
        key, slot = self._locate(path, seg_index)
        region = self.regions.get(key)
        if region is None:
            return None
        return region.segments.get(slot)

    def put_segment(self, path, seg_index, data):
        key, slot = self._locate(path, seg_index)
        region = self.regions.get(key)
        if region is None:
            region = Region(path, key[1])
            self._admissions += 1
            region.admitted_at = self._admissions
            self.regions[key] = region  # OrderedDict order = admission (FIFO) order
            while len(self.regions) > self.capacity:
                self.evict_one()
        region.segments[slot] = data

    def evict_one(self):
        """Evict the oldest admitted region; returns its key or None."""
        if not self.regions:
            return None
        key, _ = self.regions.popitem(last=False)
        self.evictions += 1
        return key

    def invalidate(self, path):
        for key in [k for k in self.regions if k[0] == path]:
            del self.regions[key]


@dataclass
class BufferFrame:
    key: Tuple[str, int]  # (path, segment index)
    data: bytes
    # admitted clear: a touch (get) is what earns the extra sweep
    ref_bit: bool = False
    pin_count: int = 0


class BufferPool:
    """Fixed pool of segment-aligned frames, second-chance replacement."""

    def __init__(self, capacity=32):
        self.capacity = capacity
        self.frames: Dict[Tuple[str, int], BufferFrame] = {}
        self._clock_order: list = []  # keys in insertion order
        self._hand = 0
        self.evictions = 0

    def get(self, path, seg_index):
        frame = self.frames.get((path, seg_index))
        if frame is None:
            return None
        frame.ref_bit = True
        return frame

    def pin(self, path, seg_index):
        frame = self.frames.get((path, seg_index))
        if frame is not None:
            frame.pin_count += 1
        return frame

    def unpin(self, path, seg_index):
        frame = self.frames.get((path, seg_index))
        if frame is not None and frame.pin_count > 0:
            frame.pin_count -= 1

    def put(self, path, seg_index, data):
        key = (path, seg_index)
        if key in self.frames:
            self.frames[key].data = data
            self.frames[key].ref_bit = True
            return self.frames[key]
        if len(self.frames) >= self.capacity:
            self.evict_one()
        frame = BufferFrame(key, data)
        self.frames[key] = frame
        self._clock_order.append(key)
        return frame

    def evict_one(self):
        """Clock sweep: clear ref bits in passing, skip pinned frames, evict
        the first frame found with a clear reference bit."""
        live = [k for k in self._clock_order if k in self.frames]
        self._clock_order = live
        if not live:
            return None
        if all(self.frames[k].pin_count > 0 for k in live):
            raise AllPinned("every buffer frame is pinned")
        n = len(live)
        self._hand %= n
        sweeps = 0
        while sweeps < 2 * n + 1:
            key = live[self._hand]
            frame = self.frames[key]
            self._hand = (self._hand + 1) % n
            sweeps += 1
            if frame.pin_count > 0:
                continue
            if frame.ref_bit:
                frame.ref_bit = False
                continue
            del self.frames[key]
            self.evictions += 1
            return key
        return None

    def invalidate(self, path):
        for key in [k for k in self.frames if k[0] == path]:
            del self.frames[key]


def _bucket(value, buckets=64):
    return int.from_bytes(hashlib.blake2b(value.encode("utf-8"), digest_size=4).digest(), "little") % buckets


class MetadataManager:
    """Two-level hash hierarchy: path hash -> offset-bucket hash -> segment
    locations. Inactive entries serialize to JSON and reload losslessly."""

    SEGMENTS_PER_BUCKET = 64

    def __init__(self):
        self.active: Dict[int, Dict[str, Dict[int, dict]]] = {}
        self.inactive: Dict[str, str] = {}  # path -> serialized entry

    def _entry(self, path, create=False):
        level1 = self.active.setdefault(_bucket(path), {})
        entry = level1.get(path)
        if entry is None:
            if path in self.inactive:
                entry = level1[path] = {
                    int(b): {int(s): loc for s, loc in segs.items()}
                    for b, segs in json.loads(self.inactive.pop(path)).items()
                }
            elif create:
                entry = level1[path] = {}
        return entry

    def record(self, path, seg_index, location):
        entry = self._entry(path, create=True)
        entry.setdefault(seg_index // self.SEGMENTS_PER_BUCKET, {})[seg_index] = location

    def lookup(self, path, seg_index):
        entry = self._entry(path)
        if entry is None:
            return None
        return entry.get(seg_index // self.SEGMENTS_PER_BUCKET, {}).get(seg_index)

    def forget(self, path):
        self.active.get(_bucket(path), {}).pop(path, None)
        self.inactive.pop(path, None)

    def deactivate(self, path):
        """Serialize an entry out of the active map (reloaded on demand)."""
        entry = self.active.get(_bucket(path), {}).pop(path, None)
        if entry is not None:
            self.inactive[path] = json.dumps(
                {str(b): {str(s): loc for s, loc in segs.items()} for b, segs in entry.items()}
            )

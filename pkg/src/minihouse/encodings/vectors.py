"""Length-and-presence layout for nullable variable-length vector columns.

Each present row's elements live in their own contiguous slice, so storage
scales with actual element count: absent rows cost one presence bit, empty
vectors cost a length entry, and no padding values ever exist.
"""

import math
import struct
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..errors import MalformedPayload
from .bits import pack_bools, unpack_bools


@dataclass
class VectorStats:
    min: float
    max: float
    l2_norm: float


@dataclass
class VectorColumn:
    presence: List[bool]
    lengths: List[int]  # zero for absent rows
    slices: List[np.ndarray]  # one per present row, in row order
    stats: List[Optional[VectorStats]]  # per row; None when absent or empty

    @property
    def row_count(self):
        return len(self.presence)

    @property
    def value_count(self):
        return sum(ln for ln, p in zip(self.lengths, self.presence) if p)


def _stats_for(arr):
    if arr.size == 0:
        return None
    return VectorStats(
        min=float(arr.min()),
        max=float(arr.max()),
        l2_norm=float(math.sqrt(float((arr * arr).sum()))),
    )


def encode_vectors_lp(vectors):
    """Build a VectorColumn from per-row optional numeric sequences."""
    presence = []
    lengths = []
    slices = []
    stats = []
    for vec in vectors:
        if vec is None:
            presence.append(False)
            lengths.append(0)
            stats.append(None)
            continue
        arr = np.asarray(list(vec), dtype=np.float64)
        presence.append(True)
        lengths.append(int(arr.size))
        slices.append(arr)
        stats.append(_stats_for(arr))
    return VectorColumn(presence, lengths, slices, stats)


def decode_vectors_lp(col):
    out = []
    it = iter(col.slices)
    for present in col.presence:
        if not present:
            out.append(None)
        else:
            out.append(next(it).tolist())
    return out


def vector_column_to_bytes(col):
    n = col.row_count
    head = struct.pack("<I", n) + pack_bools(col.presence)
    present_lengths = [ln for ln, p in zip(col.lengths, col.presence) if p]
    lens = np.array(present_lengths, dtype="<u4").tobytes() if present_lengths else b""
    values = b"".join(s.astype("<f8").tobytes() for s in col.slices)
    return head + lens + values


def vector_column_from_bytes(buf):
    if len(buf) < 4:
        raise MalformedPayload("vector block shorter than header")
    (n,) = struct.unpack_from("<I", buf, 0)
    off = 4
    bitmap_len = (n + 7) // 8
    presence = unpack_bools(buf[off : off + bitmap_len], n)
    off += bitmap_len
    n_present = sum(presence)
    if off + 4 * n_present > len(buf):
        raise MalformedPayload("vector lengths truncated")
    present_lengths = (
        np.frombuffer(buf, dtype="<u4", count=n_present, offset=off).tolist()
        if n_present
        else []
    )
    off += 4 * n_present
    total = sum(present_lengths)
    if off + 8 * total != len(buf):
        raise MalformedPayload("vector values length mismatch")
    flat = np.frombuffer(buf, dtype="<f8", count=total, offset=off)
    slices = []
    stats = []
    lengths = []
    pos = 0
    li = iter(present_lengths)
    for present in presence:
        if not present:
            lengths.append(0)
            stats.append(None)
            continue
        ln = next(li)
        lengths.append(int(ln))
        arr = flat[pos : pos + ln].copy()
        pos += ln
        slices.append(arr)
        stats.append(_stats_for(arr))
    return VectorColumn(presence, lengths, slices, stats)

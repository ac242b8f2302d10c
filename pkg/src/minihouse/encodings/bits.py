"""Bit-level packing helpers (LSB-first within each byte)."""

import numpy as np

from ..errors import MalformedPayload


def pack_bools(flags):
    """Pack an iterable of booleans into bytes, LSB-first."""
    arr = np.asarray(list(flags), dtype=np.uint8)
    if arr.size == 0:
        return b""
    return np.packbits(arr, bitorder="little").tobytes()


def unpack_bools(payload, n):
    if n == 0:
        return []
    need = (n + 7) // 8
    if len(payload) < need:
        raise MalformedPayload("presence bitmap truncated")
    bits = np.unpackbits(np.frombuffer(payload[:need], dtype=np.uint8), bitorder="little")
    return [bool(b) for b in bits[:n]]


def pack_uints(values, width):
    """Pack non-negative ints < 2**width into a contiguous bit stream.

    width == 0 encodes a run of zeros as zero bytes.
    """
    n = len(values)
    if width == 0 or n == 0:
        return b""
    arr = np.array(values, dtype=np.uint64)
    bits = np.zeros(n * width, dtype=np.uint8)
    for j in range(width):
        bits[j::width] = ((arr >> np.uint64(j)) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits, bitorder="little").tobytes()


def unpack_uints(payload, n, width):
    if n == 0:
        return []
    if width == 0:
        return [0] * n
    need = (n * width + 7) // 8
    if len(payload) < need:
        raise MalformedPayload("bit-packed payload truncated")
    bits = np.unpackbits(np.frombuffer(payload[:need], dtype=np.uint8), bitorder="little")
    mat = bits[: n * width].reshape(n, width).astype(np.uint64)
    weights = np.left_shift(np.uint64(1), np.arange(width, dtype=np.uint64))
    vals = (mat * weights).sum(axis=1, dtype=np.uint64)
    return [int(v) for v in vals]

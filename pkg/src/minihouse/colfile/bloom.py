"""Bloom filter over int/str keys, shared by file-level pruning and
runtime join filters. Double hashing from one blake2b digest; no false
negatives by construction."""

import hashlib
import math
import struct
from dataclasses import dataclass


def _hash_pair(data):
    d = hashlib.blake2b(data, digest_size=16).digest()
    return int.from_bytes(d[:8], "little"), int.from_bytes(d[8:], "little")


def canonical_bytes(value):
    if isinstance(value, bool):
        raise TypeError("bloom filters index ints and strings only")
    if isinstance(value, int):
        return b"i" + struct.pack("<q", value)
    if isinstance(value, str):
        return b"s" + value.encode("utf-8")
    raise TypeError(f"bloom filters index ints and strings only, got {type(value)!r}")


@dataclass
class BloomFilter:
    n_bits: int
    n_hashes: int
    bits: bytearray

    @classmethod
    def empty(cls, n_keys, bits_per_key=10, n_hashes=7):
        n_bits = max(8, n_keys * bits_per_key)
        return cls(n_bits, n_hashes, bytearray((n_bits + 7) // 8))

    @classmethod
    def with_fp_rate(cls, n_keys, fp_rate):
        """Size for a target false-positive rate."""
        n_keys = max(1, n_keys)
        n_bits = max(8, int(math.ceil(-n_keys * math.log(fp_rate) / (math.log(2) ** 2))))
        n_hashes = max(1, int(round(n_bits / n_keys * math.log(2))))
        return cls(n_bits, n_hashes, bytearray((n_bits + 7) // 8))

    @classmethod
    def build(cls, values, bits_per_key=10, n_hashes=7):
        values = list(values)
        f = cls.empty(len(values), bits_per_key, n_hashes)
        for v in values:
            f.add(v)
        return f

    def add(self, value):
        h1, h2 = _hash_pair(canonical_bytes(value))
        for i in range(self.n_hashes):
            idx = (h1 + i * h2) % self.n_bits
            self.bits[idx >> 3] |= 1 << (idx & 7)

    def might_contain(self, value):
        h1, h2 = _hash_pair(canonical_bytes(value))
        for i in range(self.n_hashes):
            idx = (h1 + i * h2) % self.n_bits
            if not (self.bits[idx >> 3] >> (idx & 7)) & 1:
                return False
        return True

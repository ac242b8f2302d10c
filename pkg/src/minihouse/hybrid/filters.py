"""Runtime join filters: bloom (probabilistic) and bitmap (exact, bounded
int domains). Built from the selective side of a join and probed by scans;
zero false negatives over the build set."""

from dataclasses import dataclass, replace
from typing import Optional

from ..colfile.bloom import BloomFilter
from ..errors import DomainTooLarge

BITMAP_MAX_DOMAIN = 1 << 26


@dataclass
class RuntimeFilter:
    kind: str  # "bloom" | "bitmap"
    column: str  # probe column name
    bloom: Optional[BloomFilter] = None
    bitmap_lo: int = 0
    bitmap: Optional[bytearray] = None

    def might_contain(self, value):
        if value is None:
            return False
        if self.kind == "bloom":
            return self.bloom.might_contain(value)
        idx = value - self.bitmap_lo
        if idx < 0 or idx >= 8 * len(self.bitmap):
            return False
        return bool((self.bitmap[idx >> 3] >> (idx & 7)) & 1)

    def probing(self, column):
        """Same filter payload probed through a differently named column."""
        return replace(self, column=column)


def build_runtime_filter(rows, key_column, kind="bloom", fp_rate=0.01):
    """Membership filter over the key column of `rows` (dicts)."""
    keys = [r[key_column] for r in rows if r.get(key_column) is not None]
    if kind == "bitmap":
        for k in keys:
            if isinstance(k, bool) or not isinstance(k, int):
                raise DomainTooLarge("bitmap filters need an integer key domain")
        if keys:
            lo, hi = min(keys), max(keys)
            if hi - lo + 1 > BITMAP_MAX_DOMAIN:
                raise DomainTooLarge(f"bitmap domain {hi - lo + 1} exceeds {BITMAP_MAX_DOMAIN}")
        else:
            lo = 0
        bm = bytearray(((max(keys) - lo if keys else 0) + 8) // 8 + 1)
        for k in keys:
            idx = k - lo
            bm[idx >> 3] |= 1 << (idx & 7)
        return RuntimeFilter("bitmap", key_column, bitmap_lo=lo, bitmap=bm)
    if kind != "bloom":
        raise DomainTooLarge(f"unknown filter kind {kind!r}")
    bf = BloomFilter.with_fp_rate(len(keys), fp_rate)
    for k in keys:
        bf.add(k)
    return RuntimeFilter("bloom", key_column, bloom=bf)

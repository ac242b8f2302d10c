"""Rank fusion: min-max normalized weighted scores, or reciprocal-rank
fusion (RRF) which depends only on rank positions:

    RRF(d) = sum over lists containing d of 1 / (k + rank_i(d))

k (typically 60) damps the contribution of lower-ranked items. Items
absent from a list contribute nothing for it; ties break by ascending id.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

from ..errors import MinihouseError
from ..ivm.deltas import order_key
from .retrieval import RankedList

DEFAULT_RRF_K = 60.0


@dataclass(frozen=True)
class FusionSpec:
    mode: str = "rrf"  # "score" | "rrf"
    weights: Optional[Tuple[float, ...]] = None  # score mode; normalized to sum 1
    k: float = DEFAULT_RRF_K
    top_k: int = 10

    def __post_init__(self):
        if self.mode not in ("score", "rrf"):
            raise MinihouseError(f"unknown fusion mode {self.mode!r}")
        if self.k <= 0:
            raise MinihouseError("rrf smoothing constant k must be > 0")
        if self.top_k < 1:
            raise MinihouseError("top_k must be >= 1")
        if self.weights is not None:
            if any(w < 0 for w in self.weights):
                raise MinihouseError("fusion weights must be >= 0")
            total = sum(self.weights)
            if total > 0:
                object.__setattr__(
                    self, "weights", tuple(w / total for w in self.weights)
                )


def fuse_score(lists, weights, top_k=None):
    """Min-max normalize each list, then sum weighted normalized scores.

    A constant-score list normalizes to 1.0 for every member (presence is
    the only signal it carries); ids absent from a list contribute 0 there.
    """
    if len(weights) != len(lists):
        raise MinihouseError("one weight per ranked list required")
    fused = {}
    for rl, w in zip(lists, weights):
        if not rl.entries:
            continue
        scores = [s for _, s in rl.entries]
        lo, hi = min(scores), max(scores)
        for rid, s in rl.entries:
            norm = 1.0 if hi == lo else (s - lo) / (hi - lo)
            fused[rid] = fused.get(rid, 0.0) + w * norm
    entries = sorted(fused.items(), key=lambda e: (-e[1], order_key(e[0])))
    if top_k is not None:
        entries = entries[:top_k]
    return RankedList("fused", entries)


def fuse_rrf(lists, k=DEFAULT_RRF_K, top_k=None):
    """Reciprocal-rank fusion; depends only on rank orders."""
    if k <= 0:
        raise MinihouseError("rrf smoothing constant k must be > 0")
    fused = {}
    for rl in lists:
        for rank, (rid, _) in enumerate(rl.entries, start=1):
            fused[rid] = fused.get(rid, 0.0) + 1.0 / (k + rank)
    entries = sorted(fused.items(), key=lambda e: (-e[1], order_key(e[0])))
    if top_k is not None:
        entries = entries[:top_k]
    return RankedList("fused", entries)


def fuse(lists, spec):
    if spec.mode == "score":
        weights = spec.weights or tuple(1.0 / len(lists) for _ in lists)
        return fuse_score(lists, weights, spec.top_k)
    return fuse_rrf(lists, spec.k, spec.top_k)

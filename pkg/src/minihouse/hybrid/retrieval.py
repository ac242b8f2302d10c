"""Exact retrieval legs: brute-force cosine similarity and term-frequency
text scoring. Both rank every eligible row (no index approximation), break
ties by ascending row id, and count how many rows they scored."""

import re
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..errors import DimensionMismatch
from ..ivm.deltas import order_key

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass
class RankedList:
    """Per-modality ordered results; rank r starts at 1."""

    label: str
    entries: List[Tuple[object, float]]  # (row id, raw score), best first

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: (-e[1], order_key(e[0])))

    def ranks(self):
        return {rid: i + 1 for i, (rid, _) in enumerate(self.entries)}

    def ids(self):
        return [rid for rid, _ in self.entries]

    def restricted_to(self, keep):
        """Same ordering restricted to ids in `keep`; ranks recomputed."""
        return RankedList(self.label, [(rid, s) for rid, s in self.entries if rid in keep])

    def top(self, k):
        if k is None:
            return self
        return RankedList(self.label, self.entries[:k])


@dataclass
class LegCounters:
    scored_rows: int = 0


def tokenize(text):
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def vector_topk(query, items, vector_column, k=None, filter=None, counters=None):
    """Exact top-k by cosine similarity over filter-surviving rows.

    `items` is a sequence of (row id, row dict); rows with an absent vector
    are skipped; a present vector of the wrong dimensionality raises.
    """
    q = np.asarray(list(query), dtype=np.float64)
    qn = float(np.sqrt((q * q).sum()))
    ids = []
    mats = []
    for rid, row in items:
        if filter is not None and not filter.might_contain(row.get(filter.column)):
            continue
        vec = row.get(vector_column)
        if vec is None:
            continue
        if len(vec) != q.size:
            raise DimensionMismatch(f"vector of length {len(vec)} vs query {q.size}")
        ids.append(rid)
        mats.append(vec)
    if counters is not None:
        counters.scored_rows += len(ids)
    if not ids:
        return RankedList("vector", [])
    m = np.asarray(mats, dtype=np.float64)
    norms = np.sqrt((m * m).sum(axis=1))
    denom = norms * qn
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, m @ q / denom, 0.0)
    entries = [(rid, float(s)) for rid, s in zip(ids, sims)]
    return RankedList("vector", entries).top(k)


def text_topk(terms, items, text_column, k=None, filter=None, counters=None):
    """Exact top-k by summed term frequency; zero-scoring rows are excluded."""
    wanted = [t.lower() for t in terms if t]
    entries = []
    scored = 0
    for rid, row in items:
        if filter is not None and not filter.might_contain(row.get(filter.column)):
            continue
        text = row.get(text_column)
        if text is None:
            continue
        scored += 1
        tokens = tokenize(text)
        score = 0
        for term in wanted:
            score += sum(1 for t in tokens if t == term)
        if score > 0:
            entries.append((rid, float(score)))
    if counters is not None:
        counters.scored_rows += scored
    return RankedList("text", entries).top(k)

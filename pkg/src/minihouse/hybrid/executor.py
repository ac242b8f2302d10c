"""Hybrid query execution: cross-table runtime filtering, both retrieval
legs, rank fusion, and selective post-join refinement.

The optimized plan builds a runtime filter from the label side when its
predicate is selective, injects it into both legs, fuses the candidates
that truly join, and finally joins them with the filtered label rows.
Enabling or disabling the filter never changes the final rows, only the
instrumented scored-row counters.
"""

from dataclasses import dataclass
from typing import Dict, List

from .filters import build_runtime_filter
from .fusion import fuse
from .retrieval import LegCounters, RankedList, text_topk, vector_topk

SELECTIVITY_THRESHOLD = 0.10


@dataclass
class HybridCounters:
    vector_scored: int = 0
    text_scored: int = 0
    filter_built: bool = False

    @property
    def scored_rows(self):
        return self.vector_scored + self.text_scored


@dataclass
class HybridResult:
    fused: RankedList
    rows: List[dict]
    counters: HybridCounters


def execute_hybrid(
    doc_items,
    label_rows,
    join_on,
    predicate,
    fusion,
    query_vector=None,
    terms=None,
    vector_column="emb",
    text_column="body",
    use_runtime_filter=True,
    selectivity_threshold=SELECTIVITY_THRESHOLD,
    filter_kind="bloom",
    fp_rate=0.01,
):
    """Run the hybrid plan over materialized rows.

    doc_items: sequence of (row id, row dict) for the document table.
    label_rows: row dicts of the label table. join_on = (doc_col, label_col).
    Returns the fused candidates joined with matching label rows.
    """
    doc_col, label_col = join_on
    counters = HybridCounters()

    matching_labels = [
        r for r in label_rows if predicate is None or predicate.matches(r.get(predicate.column))
    ]
    true_keys = {r[label_col] for r in matching_labels if r.get(label_col) is not None}

    rf = None
    if use_runtime_filter and label_rows:
        selectivity = len(matching_labels) / len(label_rows)
        if selectivity <= selectivity_threshold:
            rf = build_runtime_filter(matching_labels, label_col, filter_kind, fp_rate).probing(
                doc_col
            )
            counters.filter_built = True

    lists = []
    if query_vector is not None:
        vc = LegCounters()
        lists.append(vector_topk(query_vector, doc_items, vector_column, None, rf, vc))
        counters.vector_scored = vc.scored_rows
    if terms:
        tc = LegCounters()
        lists.append(text_topk(terms, doc_items, text_column, None, rf, tc))
        counters.text_scored = tc.scored_rows

    # exact post-join refinement: keep candidates whose join key truly matches
    rows_by_id = {rid: row for rid, row in doc_items}
    surviving = {
        rid
        for rl in lists
        for rid in rl.ids()
        if rows_by_id[rid].get(doc_col) in true_keys
    }
    lists = [rl.restricted_to(surviving) for rl in lists]

    fused = fuse(lists, fusion)

    labels_by_key: Dict[object, list] = {}
    for r in matching_labels:
        labels_by_key.setdefault(r.get(label_col), []).append(r)
    rows = []
    for rid, score in fused.entries:
        doc_row = rows_by_id[rid]
        for label_row in labels_by_key.get(doc_row.get(doc_col), ()):
            merged = {**doc_row, **label_row, "__fused_score": score}
            rows.append(merged)
    return HybridResult(fused, rows, counters)

"""Delta joins: inner joins via three delta subqueries, outer joins via
null-extension correction terms, both reconciled by lineage.

The inner-join delta is the classical identity

    delta(L join R) = dL join R_pre  +  L_pre join dR  +  dL join dR

computed over signed rows (insert = +1, delete = -1). Reconciliation
merges rows sharing the composite tuple key and payload, keeping the
highest update_seq; net-zero rows vanish.

Outer joins additionally track, per outer-side row, how many partners it
currently has. When the count transitions 0 -> >0 the null-extended row
is withdrawn; on >0 -> 0 one null-extended row is produced.
"""

from dataclasses import dataclass
from typing import Dict

from ..errors import KeyMismatch, StateInconsistent
from .deltas import DeltaRow, sort_deltas


@dataclass
class WorkCounters:
    """Instrumented effort: rows consumed from deltas plus matched probes."""

    delta_rows: int = 0
    probe_matches: int = 0

    @property
    def rows_processed(self):
        return self.delta_rows + self.probe_matches


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def canon(payload):
    """Hashable canonical form of a row payload (multiset identity)."""
    return tuple(sorted((k, _freeze(v)) for k, v in payload.items()))


def _join_key(payload, cols):
    try:
        return tuple(payload[c] for c in cols)
    except KeyError as exc:
        raise KeyMismatch(f"join column {exc.args[0]!r} missing from row") from exc


def _index_by_jk(rows, cols):
    idx: Dict[tuple, list] = {}
    for tk, payload in rows.items():
        idx.setdefault(_join_key(payload, cols), []).append(tk)
    return idx


class _Reconciler:
    """Accumulates signed join rows; merges duplicates by (key, payload)."""

    def __init__(self):
        self.net: Dict[tuple, list] = {}

    def add(self, tuple_key, payload, sign, seq):
        slot = self.net.setdefault((tuple_key, canon(payload)), [0, 0, payload])
        slot[0] += sign
        slot[1] = max(slot[1], seq)

    def emit(self):
        out = []
        for (tuple_key, _), (net, seq, payload) in self.net.items():
            kind = "insert" if net > 0 else "delete"
            for _ in range(abs(net)):
                out.append(DeltaRow(tuple_key, seq, kind, payload))
        return sort_deltas(out)


def apply_rows(rows, deltas):
    """Apply a delta batch to a {tuple_key: payload} table image."""
    for d in sort_deltas(deltas):
        if d.kind == "insert":
            rows[d.tuple_key] = d.payload
        else:
            rows.pop(d.tuple_key, None)
    return rows


def inner_join_delta(
    delta_left,
    left_pre,
    delta_right,
    right_pre,
    on,
    counters=None,
    left_index=None,
    right_index=None,
):
    """Delta of an inner equi-join given both pre-delta table images.

    `on` is (left_column, right_column); `left_pre`/`right_pre` map
    tuple_key -> payload as of the previous materialization point.
    Applying the output to the old join yields exactly the new join.
    """
    lcol, rcol = on
    counters = counters if counters is not None else WorkCounters()
    if left_index is None:
        left_index = _index_by_jk(left_pre, (lcol,))
    if right_index is None:
        right_index = _index_by_jk(right_pre, (rcol,))
    rec = _Reconciler()
    # dL join R_pre
    for d in delta_left:
        jk = _join_key(d.payload, (lcol,))
        for rk in right_index.get(jk, ()):  # noqa: B909 - index is pre-delta, not mutated
            counters.probe_matches += 1
            payload = {**d.payload, **right_pre[rk]}
            rec.add((d.tuple_key, rk), payload, d.sign, d.update_seq)
    # L_pre join dR
    for d in delta_right:
        jk = _join_key(d.payload, (rcol,))
        for lk in left_index.get(jk, ()):
            counters.probe_matches += 1
            payload = {**left_pre[lk], **d.payload}
            rec.add((lk, d.tuple_key), payload, d.sign, d.update_seq)
    # dL join dR
    dright_by_jk: Dict[tuple, list] = {}
    for d in delta_right:
        dright_by_jk.setdefault(_join_key(d.payload, (rcol,)), []).append(d)
    for dl in delta_left:
        jk = _join_key(dl.payload, (lcol,))
        for dr in dright_by_jk.get(jk, ()):
            payload = {**dl.payload, **dr.payload}
            rec.add(
                (dl.tuple_key, dr.tuple_key),
                payload,
                dl.sign * dr.sign,
                max(dl.update_seq, dr.update_seq),
            )
    return rec.emit()


class OuterJoinState:
    """Per outer-side tuple_key: current number of join partners."""

    def __init__(self):
        self.match_counts: Dict[tuple, int] = {}

    def audit(self, outer_rows, inner_rows, outer_col, inner_col):
        """Recount matches from the base images; raises on divergence."""
        inner_index = _index_by_jk(inner_rows, (inner_col,))
        expect = {
            tk: len(inner_index.get(_join_key(p, (outer_col,)), ()))
            for tk, p in outer_rows.items()
        }
        if expect != self.match_counts:
            raise StateInconsistent("outer-join match counts diverge from base tables")


def _null_extended(payload, other_columns, outer_is_left):
    nulls = {c: None for c in other_columns if c not in payload}
    return {**payload, **nulls} if outer_is_left else {**nulls, **payload}


def outer_join_delta(
    side,
    delta_left,
    left_pre,
    delta_right,
    right_pre,
    state,
    on,
    counters=None,
    left_columns=None,
    right_columns=None,
    left_index=None,
    right_index=None,
):
    """Delta of a left or right outer equi-join.

    Emits the inner-join delta plus correction terms on match-status
    transitions, and updates `state` to the post-delta match counts.
    """
    if side not in ("left", "right"):
        raise KeyMismatch(f"side must be left or right, got {side!r}")
    lcol, rcol = on
    counters = counters if counters is not None else WorkCounters()
    out = inner_join_delta(
        delta_left, left_pre, delta_right, right_pre, on, counters, left_index, right_index
    )

    if side == "left":
        outer_deltas, outer_pre, outer_col = delta_left, left_pre, lcol
        inner_deltas, inner_pre, inner_col = delta_right, right_pre, rcol
        other_columns = right_columns
        if other_columns is None:
            other_columns = _infer_columns(right_pre, delta_right)
    else:
        outer_deltas, outer_pre, outer_col = delta_right, right_pre, rcol
        inner_deltas, inner_pre, inner_col = delta_left, left_pre, lcol
        other_columns = left_columns
        if other_columns is None:
            other_columns = _infer_columns(left_pre, delta_left)
    outer_is_left = side == "left"

    def keyed(tk):
        return (tk, None) if outer_is_left else (None, tk)

    # post-delta images of both sides
    outer_post = apply_rows(dict(outer_pre), outer_deltas)
    inner_pre_index = _index_by_jk(inner_pre, (inner_col,))
    inner_match_delta: Dict[tuple, int] = {}
    inner_seq: Dict[tuple, int] = {}
    for d in inner_deltas:
        jk = _join_key(d.payload, (inner_col,))
        inner_match_delta[jk] = inner_match_delta.get(jk, 0) + d.sign
        inner_seq[jk] = max(inner_seq.get(jk, 0), d.update_seq)

    # outer rows whose match status may have changed
    affected = {}
    for d in outer_deltas:
        affected[d.tuple_key] = max(affected.get(d.tuple_key, 0), d.update_seq)
    outer_pre_index = _index_by_jk(outer_pre, (outer_col,))
    for jk, seq in inner_seq.items():
        if inner_match_delta.get(jk, 0) == 0:
            continue  # partners replaced, count unchanged: no transition possible
        for tk in outer_pre_index.get(jk, ()):
            counters.probe_matches += 1
            affected[tk] = max(affected.get(tk, 0), seq)

    corrections = []
    for tk in sorted(affected, key=repr):
        seq = affected[tk]
        old_payload = outer_pre.get(tk)
        new_payload = outer_post.get(tk)
        old_match = state.match_counts.get(tk, 0) if old_payload is not None else 0
        if new_payload is not None:
            jk = _join_key(new_payload, (outer_col,))
            new_match = len(inner_pre_index.get(jk, ())) + inner_match_delta.get(jk, 0)
        else:
            new_match = 0
        old_null = old_payload is not None and old_match == 0
        new_null = new_payload is not None and new_match == 0
        if old_null and (not new_null or old_payload != new_payload):
            corrections.append(
                DeltaRow(keyed(tk), seq, "delete", _null_extended(old_payload, other_columns, outer_is_left))
            )
        if new_null and (not old_null or old_payload != new_payload):
            corrections.append(
                DeltaRow(keyed(tk), seq, "insert", _null_extended(new_payload, other_columns, outer_is_left))
            )
        if new_payload is None:
            state.match_counts.pop(tk, None)
        else:
            if new_match < 0:
                raise StateInconsistent(f"negative match count for {tk!r}")
            state.match_counts[tk] = new_match
    return sort_deltas(out + corrections)


def _infer_columns(rows, deltas):
    cols = set()
    for p in rows.values():
        cols.update(p)
    for d in deltas:
        cols.update(d.payload)
    return tuple(sorted(cols))

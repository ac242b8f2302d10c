"""Incremental grouped aggregation over delta streams.

State holds grouping keys, partial aggregates, and derived results per
group. Inserts apply new values, deletes retract them, and a group whose
row count reaches zero is removed and emits a retraction.

Partial sums over float columns are kept as exact rationals so that a
retraction reverses an insert bit-exactly and incremental results match a
full recompute with no drift.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Tuple

from ..errors import StateInconsistent, UnsupportedAggregate
from .deltas import DeltaRow, sort_deltas

SUPPORTED = ("count", "sum", "avg")


@dataclass(frozen=True)
class AggSpec:
    group_by: Tuple[str, ...]
    aggs: Tuple[Tuple[str, str, str], ...]  # (output name, func, column); column "" for count

    def __post_init__(self):
        for _, func, _ in self.aggs:
            if func not in SUPPORTED:
                raise UnsupportedAggregate(
                    f"{func} is not incrementally maintainable here (count/sum/avg only)"
                )


def exact(value):
    """Lossless numeric representation used for partial sums."""
    if value is None:
        return None
    return Fraction(value)


def emit_number(frac):
    """Derived result from a partial sum: ints stay ints, floats are exact."""
    if frac.denominator == 1:
        return int(frac)
    return float(frac)


@dataclass
class _Group:
    count: int = 0
    sums: Dict[str, Fraction] = field(default_factory=dict)
    nonnull: Dict[str, int] = field(default_factory=dict)


class AggState:
    def __init__(self, spec):
        self.spec = spec
        self.groups: Dict[tuple, _Group] = {}

    def _derived_row(self, key, g):
        row = dict(zip(self.spec.group_by, key))
        for out, func, col in self.spec.aggs:
            if func == "count":
                row[out] = g.count
            elif func == "sum":
                nn = g.nonnull.get(col, 0)
                row[out] = emit_number(g.sums.get(col, Fraction(0))) if nn else None
            else:  # avg
                nn = g.nonnull.get(col, 0)
                row[out] = (
                    float(g.sums.get(col, Fraction(0)) / nn) if nn else None
                )
        return row

    def rows(self):
        return [self._derived_row(k, g) for k, g in self.groups.items()]


def apply_delta_agg(state, deltas, spec=None):
    """Fold a delta batch into the state; emits retractions and insertions
    for every group whose derived row changed."""
    spec = spec or state.spec
    if spec is not state.spec and spec != state.spec:
        raise StateInconsistent("aggregate spec does not match the state")
    agg_cols = list(dict.fromkeys(col for _, func, col in spec.aggs if func in ("sum", "avg")))
    touched: Dict[tuple, dict] = {}
    max_seq: Dict[tuple, int] = {}
    for d in sort_deltas(deltas):
        key = tuple(d.payload[c] for c in spec.group_by)
        g = state.groups.get(key)
        if key not in touched:
            touched[key] = state._derived_row(key, g) if g is not None else None
        if g is None:
            g = state.groups[key] = _Group()
        sign = d.sign
        g.count += sign
        if g.count < 0:
            raise StateInconsistent(f"group {key!r} count went negative")
        for col in agg_cols:
            v = d.payload.get(col)
            if v is None:
                continue
            g.sums[col] = g.sums.get(col, Fraction(0)) + sign * exact(v)
            g.nonnull[col] = g.nonnull.get(col, 0) + sign
        max_seq[key] = max(max_seq.get(key, 0), d.update_seq)
        if g.count == 0:
            del state.groups[key]
    out = []
    for key in sorted(touched, key=repr):
        old_row = touched[key]
        g = state.groups.get(key)
        new_row = state._derived_row(key, g) if g is not None else None
        if old_row == new_row:
            continue
        seq = max_seq[key]
        if old_row is not None:
            out.append(DeltaRow(key, seq, "delete", old_row))
        if new_row is not None:
            out.append(DeltaRow(key, seq, "insert", new_row))
    return out

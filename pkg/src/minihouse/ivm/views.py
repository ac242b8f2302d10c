"""Declarative views maintained incrementally from engine deltas.

A view is a small plan tree of filter / project / join / aggregate nodes
over base tables. Refresh pulls the lineage-tagged deltas committed since
the previous materialization point, pushes them through the tree, and
applies the output to the materialized row multiset — full recomputation
only happens in `recompute_view`, the independent reference evaluator.

Definitions are plain text, one clause per line::

    view totals
    source orders
    filter qty >= 2
    join labels on doc = ldoc inner
    aggregate by tag: count(*) as n, sum(amount) as total
    project tag, total
"""

import re
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from ..colfile import Predicate
from ..errors import UnsupportedAggregate, ViewError
from .aggregate import AggSpec, AggState, apply_delta_agg, emit_number, exact
from .deltas import DeltaRow, order_key, sort_deltas
from .joins import OuterJoinState, WorkCounters, canon, inner_join_delta, outer_join_delta

INCREMENTAL_AGGS = ("count", "sum", "avg")
RECOMPUTE_AGGS = ("min", "max")


# --- plan nodes ---


class SourceNode:
    def __init__(self, table):
        self.table = table

    def tables(self):
        return [self.table]

    def process(self, deltas_by_table, counters):
        return deltas_by_table.get(self.table, [])


class FilterNode:
    def __init__(self, child, column, op, value):
        self.child = child
        self.predicate = Predicate(column, op, value)

    def tables(self):
        return self.child.tables()

    def process(self, deltas_by_table, counters):
        out = []
        for d in self.child.process(deltas_by_table, counters):
            if self.predicate.matches(d.payload.get(self.predicate.column)):
                out.append(d)
        return out


class ProjectNode:
    def __init__(self, child, columns):
        self.child = child
        self.columns = tuple(columns)

    def tables(self):
        return self.child.tables()

    def process(self, deltas_by_table, counters):
        out = []
        for d in self.child.process(deltas_by_table, counters):
            try:
                payload = {c: d.payload[c] for c in self.columns}
            except KeyError as exc:
                raise ViewError(f"projected column {exc.args[0]!r} missing") from exc
            out.append(DeltaRow(d.tuple_key, d.update_seq, d.kind, payload))
        return out


class JoinNode:
    """Stateful equi-join node; keeps both input images and join-key
    indexes so probes touch only matching rows."""

    def __init__(self, left, right, on, kind="inner"):
        if kind not in ("inner", "left", "right"):
            raise ViewError(f"unsupported join kind {kind!r}")
        self.left = left
        self.right = right
        self.on = on
        self.kind = kind
        self.left_rows: Dict[tuple, dict] = {}
        self.right_rows: Dict[tuple, dict] = {}
        self.left_index: Dict[tuple, list] = {}
        self.right_index: Dict[tuple, list] = {}
        self.outer_state = OuterJoinState() if kind != "inner" else None
        # resolved from schemas so null extension stays stable across refreshes
        self.left_columns: Optional[Tuple[str, ...]] = None
        self.right_columns: Optional[Tuple[str, ...]] = None

    def tables(self):
        return self.left.tables() + self.right.tables()

    @staticmethod
    def _apply_side(rows, index, deltas, col):
        for d in sort_deltas(deltas):
            if d.kind == "delete":
                old = rows.pop(d.tuple_key, None)
                if old is not None:
                    jk = (old[col],)
                    bucket = index.get(jk)
                    if bucket is not None and d.tuple_key in bucket:
                        bucket.remove(d.tuple_key)
                        if not bucket:
                            del index[jk]
            else:
                rows[d.tuple_key] = d.payload
                index.setdefault((d.payload[col],), []).append(d.tuple_key)

    def process(self, deltas_by_table, counters):
        dl = self.left.process(deltas_by_table, counters)
        dr = self.right.process(deltas_by_table, counters)
        if self.kind == "inner":
            out = inner_join_delta(
                dl,
                self.left_rows,
                dr,
                self.right_rows,
                self.on,
                counters,
                self.left_index,
                self.right_index,
            )
        else:
            out = outer_join_delta(
                self.kind,
                dl,
                self.left_rows,
                dr,
                self.right_rows,
                self.outer_state,
                self.on,
                counters,
                left_columns=self.left_columns,
                right_columns=self.right_columns,
                left_index=self.left_index,
                right_index=self.right_index,
            )
        self._apply_side(self.left_rows, self.left_index, dl, self.on[0])
        self._apply_side(self.right_rows, self.right_index, dr, self.on[1])
        return out


class AggregateNode:
    """Grouped aggregation; count/sum/avg maintain partial state, while
    min/max fall back to per-group recompute over a retained row store."""

    def __init__(self, child, group_by, aggs):
        self.child = child
        self.group_by = tuple(group_by)
        self.aggs = tuple(aggs)
        funcs = {f for _, f, _ in aggs}
        unknown = funcs - set(INCREMENTAL_AGGS) - set(RECOMPUTE_AGGS)
        if unknown:
            raise UnsupportedAggregate(f"unknown aggregate(s) {sorted(unknown)}")
        self.incremental = funcs <= set(INCREMENTAL_AGGS)
        if self.incremental:
            self.state = AggState(AggSpec(self.group_by, self.aggs))
        else:
            self.store: Dict[tuple, Dict[tuple, list]] = {}  # group -> canon -> [count, payload]

    def tables(self):
        return self.child.tables()

    def process(self, deltas_by_table, counters):
        deltas = self.child.process(deltas_by_table, counters)
        if self.incremental:
            return apply_delta_agg(self.state, deltas)
        return self._process_recompute(deltas)

    # --- recompute fallback for min/max ---

    def _derive(self, group_key, rows):
        row = dict(zip(self.group_by, group_key))
        values = []
        for count, payload in rows.values():
            values.extend([payload] * count)
        for out, func, col in self.aggs:
            if func == "count":
                row[out] = len(values)
                continue
            present = [r[col] for r in values if r.get(col) is not None]
            if not present:
                row[out] = None
            elif func == "sum":
                row[out] = emit_number(sum((exact(v) for v in present), Fraction(0)))
            elif func == "avg":
                row[out] = float(sum((exact(v) for v in present), Fraction(0)) / len(present))
            elif func == "min":
                row[out] = min(present)
            else:
                row[out] = max(present)
        return row

    def _process_recompute(self, deltas):
        touched = {}
        max_seq = {}
        for d in sort_deltas(deltas):
            gk = tuple(d.payload[c] for c in self.group_by)
            if gk not in touched:
                rows = self.store.get(gk)
                touched[gk] = self._derive(gk, rows) if rows else None
            rows = self.store.setdefault(gk, {})
            slot = rows.setdefault(canon(d.payload), [0, d.payload])
            slot[0] += d.sign
            if slot[0] == 0:
                del rows[canon(d.payload)]
            if not rows:
                del self.store[gk]
            max_seq[gk] = max(max_seq.get(gk, 0), d.update_seq)
        out = []
        for gk in sorted(touched, key=order_key):
            old_row = touched[gk]
            rows = self.store.get(gk)
            new_row = self._derive(gk, rows) if rows else None
            if old_row == new_row:
                continue
            if old_row is not None:
                out.append(DeltaRow(gk, max_seq[gk], "delete", old_row))
            if new_row is not None:
                out.append(DeltaRow(gk, max_seq[gk], "insert", new_row))
        return out


# --- definitions ---


@dataclass
class ViewDefinition:
    name: str
    root: object
    tables: Tuple[str, ...]
    text: str = ""


_AGG_RE = re.compile(r"(\w+)\(\s*(\*|\w+)\s*\)\s+as\s+(\w+)", re.I)
_OPS = ("==", "!=", "<=", ">=", "<", ">")


def _parse_value(tok):
    tok = tok.strip()
    if tok.startswith(("'", '"')) and tok.endswith(tok[0]) and len(tok) >= 2:
        return tok[1:-1]
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    return tok


def parse_view_text(text):
    """Parse a view definition file into a plan tree."""
    name = None
    node = None
    tables: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        word = word.lower()
        rest = rest.strip()
        if word == "view":
            name = rest
        elif word == "source":
            if node is not None:
                raise ViewError(f"line {lineno}: source must come first")
            node = SourceNode(rest)
            tables.append(rest)
        elif word == "filter":
            if node is None:
                raise ViewError(f"line {lineno}: filter before source")
            for op in _OPS:
                if op in rest:
                    col, val = rest.split(op, 1)
                    node = FilterNode(node, col.strip(), op, _parse_value(val))
                    break
            else:
                raise ViewError(f"line {lineno}: no comparison operator in {rest!r}")
        elif word == "join":
            m = re.match(r"(\w+)\s+on\s+(\w+)\s*=\s*(\w+)(?:\s+(inner|left|right))?$", rest, re.I)
            if not m or node is None:
                raise ViewError(f"line {lineno}: malformed join clause")
            table, lcol, rcol, kind = m.groups()
            tables.append(table)
            node = JoinNode(node, SourceNode(table), (lcol, rcol), (kind or "inner").lower())
        elif word == "aggregate":
            m = re.match(r"by\s+([\w,\s]+):\s*(.+)$", rest, re.I)
            if not m or node is None:
                raise ViewError(f"line {lineno}: malformed aggregate clause")
            group_by = [c.strip() for c in m.group(1).split(",") if c.strip()]
            aggs = [
                (out, func.lower(), "" if col == "*" else col)
                for func, col, out in _AGG_RE.findall(m.group(2))
            ]
            if not aggs:
                raise ViewError(f"line {lineno}: no aggregates parsed")
            node = AggregateNode(node, group_by, aggs)
        elif word == "project":
            if node is None:
                raise ViewError(f"line {lineno}: project before source")
            node = ProjectNode(node, [c.strip() for c in rest.split(",") if c.strip()])
        else:
            raise ViewError(f"line {lineno}: unknown clause {word!r}")
    if name is None or node is None:
        raise ViewError("view definition needs at least `view <name>` and `source <table>`")
    return ViewDefinition(name, node, tuple(tables), text)


# --- column resolution ---


def resolve_columns(node, engines):
    """Propagate output column sets bottom-up; pins the null-extension
    column lists on join nodes and rejects ambiguous name collisions."""
    if isinstance(node, SourceNode):
        if node.table not in engines:
            raise ViewError(f"view references unknown table {node.table!r}")
        return tuple(engines[node.table].schema.names)
    if isinstance(node, FilterNode):
        return resolve_columns(node.child, engines)
    if isinstance(node, ProjectNode):
        return node.columns
    if isinstance(node, JoinNode):
        left = resolve_columns(node.left, engines)
        right = resolve_columns(node.right, engines)
        shared = (set(left) & set(right)) - set(node.on)
        if shared:
            raise ViewError(f"ambiguous column names across join sides: {sorted(shared)}")
        node.left_columns = left
        node.right_columns = right
        return tuple(dict.fromkeys(left + right))
    if isinstance(node, AggregateNode):
        resolve_columns(node.child, engines)
        return node.group_by + tuple(out for out, _, _ in node.aggs)
    raise ViewError(f"unknown plan node {type(node).__name__}")


# --- materialization ---


@dataclass
class RefreshResult:
    duration: float
    rows_in: int
    probe_matches: int
    applied: int
    no_op: bool


class MaterializedView:
    """In-process incremental materialization of one view definition."""

    def __init__(self, definition, engines):
        self.definition = definition
        self.engines = {}
        for t in definition.tables:
            if t not in engines:
                raise ViewError(f"view references unknown table {t!r}")
            self.engines[t] = engines[t]
        resolve_columns(definition.root, self.engines)
        self.last_refreshed = {t: 0 for t in definition.tables}
        # pin each base table at the last materialization point so merges
        # cannot garbage-collect the history the next refresh will read
        self._pins = {t: None for t in definition.tables}
        self._rows: Dict[tuple, list] = {}  # canon -> [count, payload]
        self.total = WorkCounters()

    def close(self):
        for t, pin in self._pins.items():
            if pin is not None:
                pin.close()
                self._pins[t] = None

    def _move_pins(self, targets):
        for t, version in targets.items():
            new_pin = self.engines[t].snapshot_at(version)
            if self._pins[t] is not None:
                self._pins[t].close()
            self._pins[t] = new_pin

    def multiset(self):
        return {k: slot[0] for k, slot in self._rows.items() if slot[0]}

    def rows(self):
        out = []
        for k in sorted(self._rows, key=order_key):
            count, payload = self._rows[k]
            out.extend([payload] * count)
        return out

    def refresh(self, targets=None):
        """Advance the materialization to the target versions (default: the
        engines' current versions); a no-op when already current."""
        t0 = time.perf_counter()
        if targets is None:
            targets = {t: e.current_version for t, e in self.engines.items()}
        deltas_by_table = {}
        rows_in = 0
        for t, hi in targets.items():
            lo = self.last_refreshed[t]
            if hi < lo:
                raise ViewError(f"target version {hi} below last refresh {lo} for {t!r}")
            ds = self.engines[t].collect_deltas(lo, hi) if hi > lo else []
            deltas_by_table[t] = ds
            rows_in += len(ds)
        if rows_in == 0:
            self.last_refreshed.update(targets)
            self._move_pins(targets)
            return RefreshResult(time.perf_counter() - t0, 0, 0, 0, True)
        counters = WorkCounters()
        counters.delta_rows = rows_in
        out = self.definition.root.process(deltas_by_table, counters)
        for d in out:
            slot = self._rows.setdefault(canon(d.payload), [0, d.payload])
            slot[0] += d.sign
            if slot[0] == 0:
                del self._rows[canon(d.payload)]
        self.last_refreshed.update(targets)
        self._move_pins(targets)
        self.total.delta_rows += counters.delta_rows
        self.total.probe_matches += counters.probe_matches
        return RefreshResult(
            time.perf_counter() - t0, counters.delta_rows, counters.probe_matches, len(out), False
        )


# --- independent reference evaluation (full recompute) ---


def _eval_rows(node, base_rows):
    if isinstance(node, SourceNode):
        return [dict(r) for r in base_rows[node.table]]
    if isinstance(node, FilterNode):
        pred = node.predicate
        return [r for r in _eval_rows(node.child, base_rows) if pred.matches(r.get(pred.column))]
    if isinstance(node, ProjectNode):
        return [{c: r[c] for c in node.columns} for r in _eval_rows(node.child, base_rows)]
    if isinstance(node, JoinNode):
        left = _eval_rows(node.left, base_rows)
        right = _eval_rows(node.right, base_rows)
        lcol, rcol = node.on
        right_by_jk: Dict[object, list] = {}
        for r in right:
            right_by_jk.setdefault(r[rcol], []).append(r)
        left_by_jk: Dict[object, list] = {}
        for l in left:
            left_by_jk.setdefault(l[lcol], []).append(l)
        out = []
        for l in left:
            for r in right_by_jk.get(l[lcol], ()):
                out.append({**l, **r})
        if node.kind == "left":
            rcols = node.right_columns or sorted({c for r in right for c in r})
            for l in left:
                if not right_by_jk.get(l[lcol]):
                    out.append({**l, **{c: None for c in rcols if c not in l}})
        elif node.kind == "right":
            lcols = node.left_columns or sorted({c for l in left for c in l})
            for r in right:
                if not left_by_jk.get(r[rcol]):
                    out.append({**{c: None for c in lcols if c not in r}, **r})
        return out
    if isinstance(node, AggregateNode):
        rows = _eval_rows(node.child, base_rows)
        groups: Dict[tuple, list] = {}
        for r in rows:
            groups.setdefault(tuple(r[c] for c in node.group_by), []).append(r)
        out = []
        for gk, members in groups.items():
            row = dict(zip(node.group_by, gk))
            for oname, func, col in node.aggs:
                if func == "count":
                    row[oname] = len(members)
                    continue
                present = [m[col] for m in members if m.get(col) is not None]
                if not present:
                    row[oname] = None
                elif func == "sum":
                    row[oname] = emit_number(sum((exact(v) for v in present), Fraction(0)))
                elif func == "avg":
                    row[oname] = float(sum((exact(v) for v in present), Fraction(0)) / len(present))
                elif func == "min":
                    row[oname] = min(present)
                else:
                    row[oname] = max(present)
            out.append(row)
        return out
    raise ViewError(f"unknown plan node {type(node).__name__}")


def recompute_view(definition, engines, versions=None):
    """Evaluate the view from scratch at the given versions; returns the
    row multiset as {canonical payload: count}."""
    if versions is None:
        versions = {t: engines[t].current_version for t in definition.tables}
    resolve_columns(definition.root, engines)
    base_rows = {}
    for t in definition.tables:
        snap = engines[t].snapshot_at(versions[t])
        try:
            base_rows[t] = engines[t].scan(snap)
        finally:
            snap.close()
    rows = _eval_rows(definition.root, base_rows)
    multiset: Dict[tuple, int] = {}
    for r in rows:
        multiset[canon(r)] = multiset.get(canon(r), 0) + 1
    return multiset

"""Unified table engine: staged writes with a WAL, columnar segments,
MVCC snapshots, tiered point lookup, and snapshot-consistent scans.

On-disk layout per table:

    <root>/<table>/wal.log
    <root>/<table>/segments/<version>-<kind>.snf
    <root>/<table>/manifest.json      (rewritten atomically via rename)

Writes land in a staging area (an in-process ordered map backed by the
WAL); flushes rewrite committed staged entries as immutable delta
segments; compaction merges deltas into stable segments. Readers pin a
Snapshot (a commit version) and always see a consistent state.
"""

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .. import colfile
from ..colfile import TRUE_PREDICATE
from ..colfile.schema import ColumnDef, SchemaDescriptor
from ..encodings import codecs
from ..errors import (
    SchemaMismatch,
    SegmentRetired,
    SnapshotRetired,
    TxnClosed,
    UnknownColumn,
    UnknownTable,
    WriterBusy,
)
from ..ivm.deltas import DeltaRow
from .wal import WriteAheadLog

COL_SEQ = "__seq"
COL_VER = "__ver"
COL_TOMB = "__tomb"
MVCC_COLUMNS = (COL_SEQ, COL_VER, COL_TOMB)

DEFAULT_FLUSH_MAX_ROWS = 4096
DEFAULT_FLUSH_MAX_AGE = 10.0


@dataclass
class FlushPolicy:
    max_rows: int = DEFAULT_FLUSH_MAX_ROWS
    max_age: float = DEFAULT_FLUSH_MAX_AGE


@dataclass
class Segment:
    name: str
    kind: str  # "delta" | "stable"
    min_version: int
    max_version: int
    created_at: int  # commit version at creation time
    retired_at: Optional[int] = None  # set when consumed by a merge

    def to_json(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "min_version": self.min_version,
            "max_version": self.max_version,
            "created_at": self.created_at,
            "retired_at": self.retired_at,
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            d["name"], d["kind"], d["min_version"], d["max_version"], d["created_at"], d.get("retired_at")
        )


class TxnToken:
    def __init__(self, txn_id):
        self.txn_id = txn_id
        self.open = True


class Snapshot:
    """A pinned commit version; reads at this snapshot are repeatable."""

    def __init__(self, engine, version):
        self._engine = engine
        self.version = version
        self._open = True

    def close(self):
        if self._open:
            self._open = False
            self._engine._release_snapshot(self.version)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclass
class _StagedEntry:
    seq: int
    version: Optional[int]  # None until the owning txn commits
    image: Optional[dict]  # None = tombstone
    wall: float = 0.0


def schema_to_json(sd):
    return {
        "columns": [
            {"name": c.name, "type": c.vtype, "nullable": c.nullable, "codec": c.codec}
            for c in sd.columns
        ],
        "sort_key": list(sd.sort_key),
        "primary_key": list(sd.primary_key),
    }


def schema_from_json(d):
    cols = tuple(
        ColumnDef(c["name"], c["type"], c["nullable"], c.get("codec")) for c in d["columns"]
    )
    return SchemaDescriptor(cols, tuple(d["sort_key"]), tuple(d["primary_key"]))


class TableEngine:
    """Single-writer, multi-reader table engine rooted at a directory."""

    def __init__(self, table_dir, schema, segments, last_version, last_seq, *, fsync=False, clock=time.monotonic):
        self.dir = Path(table_dir)
        self.name = self.dir.name
        self.schema = schema
        if len(schema.primary_key) != 2:
            raise SchemaMismatch("primary key must be a (document, chunk) column pair")
        self.pk = schema.primary_key
        self.segments: List[Segment] = segments
        self.clock = clock
        self.wal = WriteAheadLog(self.dir / "wal.log", fsync=fsync)
        self.staging: Dict[tuple, List[_StagedEntry]] = {}
        self._last_version = last_version
        self._last_seq = last_seq
        self._txn: Optional[TxnToken] = None
        self._txn_entries: List[Tuple[tuple, _StagedEntry]] = []
        self._next_txn_id = 1
        self._open_snapshots: Dict[int, int] = {}
        self._handles: Dict[str, colfile.FileHandle] = {}
        self._group_cache: Dict[Tuple[str, int, str], list] = {}
        self.group_target_rows = colfile.DEFAULT_GROUP_ROWS
        # reads below this version may see merged-away history
        self._delta_horizon = 0

    # --- lifecycle ---

    @classmethod
    def create(cls, root, name, schema, *, fsync=False, clock=time.monotonic):
        table_dir = Path(root) / name
        if (table_dir / "manifest.json").exists():
            raise SchemaMismatch(f"table {name!r} already exists")
        (table_dir / "segments").mkdir(parents=True, exist_ok=True)
        eng = cls(table_dir, schema, [], 0, 0, fsync=fsync, clock=clock)
        eng._write_manifest()
        return eng

    @classmethod
    def open(cls, root, name, *, fsync=False, clock=time.monotonic):
        table_dir = Path(root) / name
        manifest_path = table_dir / "manifest.json"
        if not manifest_path.exists():
            raise UnknownTable(name)
        m = json.loads(manifest_path.read_text())
        schema = schema_from_json(m["schema"])
        segments = [Segment.from_json(s) for s in m["segments"]]
        eng = cls(table_dir, schema, segments, m["last_version"], m["last_seq"], fsync=fsync, clock=clock)
        eng._delta_horizon = m.get("delta_horizon", 0)
        eng._replay_wal()
        return eng

    def _write_manifest(self):
        m = {
            "schema": schema_to_json(self.schema),
            "segments": [s.to_json() for s in self.segments],
            "last_version": self._last_version,
            "last_seq": self._last_seq,
            "delta_horizon": self._delta_horizon,
        }
        tmp = self.dir / "manifest.json.tmp"
        tmp.write_text(json.dumps(m, indent=1, sort_keys=True))
        os.replace(tmp, self.dir / "manifest.json")

    def _replay_wal(self):
        pending: Dict[int, List[Tuple[tuple, _StagedEntry]]] = {}
        now = self.clock()
        for rec in self.wal.replay():
            t = rec["t"]
            if t == "meta":
                self._last_version = max(self._last_version, rec["v"])
                self._last_seq = max(self._last_seq, rec["s"])
            elif t == "w":
                entry = _StagedEntry(rec["s"], None, rec["i"], now)
                pending.setdefault(rec["x"], []).append((tuple(rec["k"]), entry))
                self._last_seq = max(self._last_seq, rec["s"])
                self._next_txn_id = max(self._next_txn_id, rec["x"] + 1)
            elif t == "c":
                self._last_version = max(self._last_version, rec["v"])
                for key, entry in pending.pop(rec["x"], []):
                    entry.version = rec["v"]
                    self.staging.setdefault(key, []).append(entry)
        # entries of transactions that never committed are dropped

    # --- write path ---

    def begin_txn(self):
        if self._txn is not None and self._txn.open:
            raise WriterBusy("a write transaction is already open")
        self._txn = TxnToken(self._next_txn_id)
        self._next_txn_id += 1
        self._txn_entries = []
        return self._txn

    def _check_txn(self, txn):
        if txn is not self._txn or not txn.open:
            raise TxnClosed("transaction is not open")

    def _row_key(self, row):
        key = []
        for name in self.pk:
            v = row.get(name)
            if v is None:
                raise SchemaMismatch(f"primary key column {name!r} must be set")
            key.append(v)
        return tuple(key)

    def _normalize_row(self, row):
        unknown = set(row) - set(self.schema.names)
        if unknown:
            raise SchemaMismatch(f"unknown columns {sorted(unknown)}")
        full = {c.name: row.get(c.name) for c in self.schema.columns}
        for c in self.schema.columns:
            v = full[c.name]
            if v is None:
                continue
            if c.vtype == codecs.TYPE_INT and (isinstance(v, bool) or not isinstance(v, int)):
                raise SchemaMismatch(f"column {c.name!r} expects int")
            if c.vtype == codecs.TYPE_FLOAT:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SchemaMismatch(f"column {c.name!r} expects float")
                full[c.name] = float(v)
            if c.vtype == codecs.TYPE_STR and not isinstance(v, str):
                raise SchemaMismatch(f"column {c.name!r} expects str")
            if c.vtype == codecs.TYPE_VECTOR:
                full[c.name] = [float(x) for x in v]
        return full

    def write_rows(self, txn, rows):
        """Stage full-row images; durable in the WAL before returning."""
        self._check_txn(txn)
        staged = []
        for row in rows:
            full = self._normalize_row(row)
            key = self._row_key(full)
            self._last_seq += 1
            entry = _StagedEntry(self._last_seq, None, full, self.clock())
            self.wal.append({"t": "w", "x": txn.txn_id, "k": list(key), "i": full, "s": entry.seq})
            staged.append((key, entry))
        self._txn_entries.extend(staged)
        return len(staged)

    def delete_rows(self, txn, keys):
        """Stage tombstones for the given (document, chunk) keys."""
        self._check_txn(txn)
        for key in keys:
            key = tuple(key)
            if len(key) != 2:
                raise SchemaMismatch("row keys are (document, chunk) pairs")
            self._last_seq += 1
            entry = _StagedEntry(self._last_seq, None, None, self.clock())
            self.wal.append({"t": "w", "x": txn.txn_id, "k": list(key), "i": None, "s": entry.seq})
            self._txn_entries.append((key, entry))
        return len(keys)

    def commit(self, txn):
        """Make the txn's entries visible atomically at a new version."""
        self._check_txn(txn)
        self._last_version += 1
        version = self._last_version
        self.wal.append({"t": "c", "x": txn.txn_id, "v": version})
        for key, entry in self._txn_entries:
            entry.version = version
            self.staging.setdefault(key, []).append(entry)
        self._txn_entries = []
        txn.open = False
        self._txn = None
        return version

    # --- snapshots ---

    @property
    def current_version(self):
        return self._last_version

    def snapshot(self):
        return self.snapshot_at(self._last_version)

    def snapshot_at(self, version):
        """Pin a past commit version; raises once merges have discarded the
        history needed to read it."""
        if version > self._last_version:
            raise SnapshotRetired(f"version {version} has not been committed yet")
        if 0 < version < self._delta_horizon:
            raise SnapshotRetired(f"version {version} predates retained history")
        snap = Snapshot(self, version)
        self._open_snapshots[snap.version] = self._open_snapshots.get(snap.version, 0) + 1
        return snap

    def _release_snapshot(self, version):
        n = self._open_snapshots.get(version, 0)
        if n <= 1:
            self._open_snapshots.pop(version, None)
        else:
            self._open_snapshots[version] = n - 1
        self._gc_graveyard()

    def _min_open_snapshot(self):
        return min(self._open_snapshots) if self._open_snapshots else None

    # --- flush ---

    def _committed_staging(self):
        out = []
        for key, entries in self.staging.items():
            for e in entries:
                if e.version is not None:
                    out.append((key, e))
        return out

    def flush_staging(self, policy=None, force=False):
        """Rewrite committed staged entries as one delta segment when the
        row-count or age threshold is exceeded (no-op below thresholds)."""
        policy = policy or FlushPolicy()
        committed = self._committed_staging()
        if not committed:
            return None
        if not force:
            oldest = min(e.wall for _, e in committed)
            over_rows = len(committed) >= policy.max_rows
            over_age = (self.clock() - oldest) >= policy.max_age
            if not (over_rows or over_age):
                return None
        committed.sort(key=lambda ke: (ke[0], ke[1].seq))
        seg = self._write_segment(
            rows=[(k, e.seq, e.version, e.image) for k, e in committed],
            kind="delta",
            created_at=self._last_version,
        )
        flushed = {id(e) for _, e in committed}
        for key in list(self.staging):
            remaining = [e for e in self.staging[key] if id(e) not in flushed]
            if remaining:
                self.staging[key] = remaining
            else:
                del self.staging[key]
        self._rewrite_wal()
        return seg

    def _segment_schema(self):
        cols = []
        for c in self.schema.columns:
            nullable = c.nullable or c.name not in self.pk
            cols.append(ColumnDef(c.name, c.vtype, False if c.name in self.pk else True, c.codec))
        cols.append(ColumnDef(COL_SEQ, codecs.TYPE_INT, False))
        cols.append(ColumnDef(COL_VER, codecs.TYPE_INT, False))
        cols.append(ColumnDef(COL_TOMB, codecs.TYPE_INT, False))
        return SchemaDescriptor(tuple(cols), tuple(self.pk), tuple(self.pk))

    def _write_segment(self, rows, kind, created_at, versions=None):
        """rows: list of (key, seq, version, image-or-None), sorted by (key, seq)."""
        seg_schema = self._segment_schema()
        columns = {c.name: [] for c in seg_schema.columns}
        for key, seq, version, image in rows:
            for name, v in zip(self.pk, key):
                columns[name].append(v)
            for c in self.schema.columns:
                if c.name in self.pk:
                    continue
                columns[c.name].append(None if image is None else image[c.name])
            columns[COL_SEQ].append(seq)
            columns[COL_VER].append(version)
            columns[COL_TOMB].append(0 if image is not None else 1)
        blob, _ = colfile.write_file(columns, seg_schema, self.group_target_rows)
        if versions is None:
            versions = (
                min(r[2] for r in rows),
                max(r[2] for r in rows),
            )
        name = f"{created_at:010d}-{kind}.snf"
        (self.dir / "segments" / name).write_bytes(blob)
        seg = Segment(name, kind, versions[0], versions[1], created_at)
        self.segments.append(seg)
        self._write_manifest()
        return seg

    def _rewrite_wal(self):
        records = [{"t": "meta", "v": self._last_version, "s": self._last_seq}]
        if self._txn is not None and self._txn.open:
            for key, entry in self._txn_entries:
                records.append(
                    {"t": "w", "x": self._txn.txn_id, "k": list(key), "i": entry.image, "s": entry.seq}
                )
        # committed-but-unflushed entries survive in staging and must stay in the log
        for key, entries in self.staging.items():
            for e in entries:
                records.append({"t": "w", "x": 0, "k": list(key), "i": e.image, "s": e.seq})
                records.append({"t": "c", "x": 0, "v": e.version})
        self.wal.rewrite(records)

    # --- segment access ---

    def live_segments(self):
        return [s for s in self.segments if s.retired_at is None]

    def live_delta_segments(self):
        return [s for s in self.segments if s.retired_at is None and s.kind == "delta"]

    def _segments_for(self, version):
        """Segments a reader at `version` consults, newest first."""
        segs = [
            s
            for s in self.segments
            if (s.retired_at is None or s.retired_at > version) and s.min_version <= version
        ]
        segs.sort(key=lambda s: (s.max_version, s.created_at), reverse=True)
        return segs

    def _handle(self, seg):
        h = self._handles.get(seg.name)
        if h is None:
            blob = (self.dir / "segments" / seg.name).read_bytes()
            h = colfile.open_file(blob)
            self._handles[seg.name] = h
        return h

    def _group_col(self, seg, gi, name):
        key = (seg.name, gi, name)
        vals = self._group_cache.get(key)
        if vals is None:
            h = self._handle(seg)
            vals = colfile.read_group_column(h, h.groups[gi], name)
            self._group_cache[key] = vals
        return vals

    def io_stats(self):
        reads = sum(h.io.block_reads for h in self._handles.values())
        bytes_read = sum(h.io.bytes_read for h in self._handles.values())
        return {"block_reads": reads, "bytes_read": bytes_read}

    def reset_io(self):
        for h in self._handles.values():
            h.io.reset()

    def drop_caches(self):
        self._handles.clear()
        self._group_cache.clear()

    # --- read path ---

    def _staging_lookup(self, version, key):
        entries = self.staging.get(key)
        if not entries:
            return None
        best = None
        for e in entries:
            if e.version is not None and e.version <= version:
                if best is None or (e.version, e.seq) > (best.version, best.seq):
                    best = e
        return best

    def _segment_lookup(self, seg, version, key):
        """Newest visible (version, seq, image) for `key` within one segment."""
        h = self._handle(seg)
        hits = colfile.locate_key(h, key)
        best = None
        for gi, refs in hits:
            cols = {}
            for name, ref_list in refs.items():
                vals = []
                for ref in ref_list:
                    vals.extend(colfile.read_block(h, ref, h.column_type(name)))
                cols[name] = vals
            n = len(cols[self.pk[0]])
            for i in range(n):
                if tuple(cols[k][i] for k in self.pk) != key:
                    continue
                ver = cols[COL_VER][i]
                if ver > version:
                    continue
                seq = cols[COL_SEQ][i]
                if best is None or (ver, seq) > (best[0], best[1]):
                    image = None
                    if not cols[COL_TOMB][i]:
                        image = {c: cols[c][i] for c in self.schema.names}
                    best = (ver, seq, image)
        return best

    def _lookup_at(self, version, key):
        """Newest visible (version, seq, image-or-None) across all tiers."""
        e = self._staging_lookup(version, key)
        if e is not None:
            return (e.version, e.seq, e.image)
        for seg in self._segments_for(version):
            found = self._segment_lookup(seg, version, key)
            if found is not None:
                return found
        return None

    def point_lookup(self, snapshot, key):
        """Newest visible row image for a key, or None. Probes staging first,
        then delta and stable segments newest-first."""
        found = self._lookup_at(snapshot.version, tuple(key))
        if found is None:
            return None
        return found[2]

    def _predicate_prunable(self, predicate):
        return predicate.column is not None and predicate.column in self.pk

    def scan(self, snapshot, predicate=TRUE_PREDICATE, projection=None):
        """All visible rows at the snapshot matching the predicate.

        Equivalent to: materialize every tier, keep the newest visible image
        per key, drop tombstones, filter, project. Sort-key predicates prune
        record groups before any block is read.
        """
        if predicate.column is not None and self.schema.find(predicate.column) is None:
            raise UnknownColumn(predicate.column)
        if projection is not None:
            for name in projection:
                if self.schema.find(name) is None:
                    raise UnknownColumn(name)
        version = snapshot.version
        resolved: Dict[tuple, Tuple[int, int, Optional[dict]]] = {}
        for key in self.staging:
            e = self._staging_lookup(version, key)
            if e is not None:
                resolved[key] = (e.version, e.seq, e.image)
        prunable = self._predicate_prunable(predicate)
        payload_cols = [c for c in self.schema.names if c not in self.pk]
        for seg in self._segments_for(version):
            h = self._handle(seg)
            group_ids = (
                colfile.prune(h, predicate) if prunable else range(len(h.groups))
            )
            best_here: Dict[tuple, Tuple[int, int, Optional[dict]]] = {}
            for gi in group_ids:
                kcols = [self._group_col(seg, gi, k) for k in self.pk]
                vers = self._group_col(seg, gi, COL_VER)
                seqs = self._group_col(seg, gi, COL_SEQ)
                tombs = self._group_col(seg, gi, COL_TOMB)
                payload = {c: self._group_col(seg, gi, c) for c in payload_cols}
                for i in range(len(vers)):
                    if vers[i] > version:
                        continue
                    key = tuple(col[i] for col in kcols)
                    if key in resolved:
                        continue
                    prev = best_here.get(key)
                    if prev is not None and (vers[i], seqs[i]) <= (prev[0], prev[1]):
                        continue
                    image = None
                    if not tombs[i]:
                        image = {k: kcols[j][i] for j, k in enumerate(self.pk)}
                        for c in payload_cols:
                            image[c] = payload[c][i]
                    best_here[key] = (vers[i], seqs[i], image)
            for key, entry in best_here.items():
                resolved[key] = entry
        rows = []
        for key in sorted(resolved):
            _, _, image = resolved[key]
            if image is None:
                continue
            if not predicate.matches(image.get(predicate.column) if predicate.column else None):
                continue
            if projection is not None:
                image = {c: image[c] for c in projection}
            rows.append(image)
        return rows

    # --- merges (driven by the compaction controller) ---

    def merge_segments(self, names):
        """Merge the named delta segments into one stable segment.

        Keeps the newest image per key; tombstones are dropped only when no
        other live segment could hold an older image of the key. Snapshots
        opened before the merge keep reading the inputs (graveyard).
        """
        by_name = {s.name: s for s in self.segments}
        inputs = []
        for name in names:
            seg = by_name.get(name)
            if seg is None or seg.retired_at is not None:
                raise SegmentRetired(name)
            inputs.append(seg)
        input_names = set(names)
        others_exist = any(s.retired_at is None and s.name not in input_names for s in self.segments)

        best: Dict[tuple, Tuple[int, int, Optional[dict], tuple]] = {}
        for seg in inputs:
            h = self._handle(seg)
            for gi in range(len(h.groups)):
                kcols = [self._group_col(seg, gi, k) for k in self.pk]
                vers = self._group_col(seg, gi, COL_VER)
                seqs = self._group_col(seg, gi, COL_SEQ)
                tombs = self._group_col(seg, gi, COL_TOMB)
                payload_cols = [c for c in self.schema.names if c not in self.pk]
                payload = {c: self._group_col(seg, gi, c) for c in payload_cols}
                for i in range(len(vers)):
                    key = tuple(col[i] for col in kcols)
                    prev = best.get(key)
                    if prev is not None and (vers[i], seqs[i]) <= (prev[0], prev[1]):
                        continue
                    image = None
                    if not tombs[i]:
                        image = {k: kcols[j][i] for j, k in enumerate(self.pk)}
                        for c in payload_cols:
                            image[c] = payload[c][i]
                    best[key] = (vers[i], seqs[i], image, key)

        self._last_version += 1
        merge_version = self._last_version
        self.wal.append({"t": "meta", "v": self._last_version, "s": self._last_seq})

        out_rows = []
        for key in sorted(best):
            ver, seq, image, _ = best[key]
            if image is None and not others_exist:
                continue  # tombstone shadows nothing: drop it
            out_rows.append((key, seq, ver, image))
        versions = (min(s.min_version for s in inputs), max(s.max_version for s in inputs))
        seg = self._write_segment(out_rows, "stable", merge_version, versions=versions)
        for s in inputs:
            s.retired_at = merge_version
        self._write_manifest()
        self._gc_graveyard()
        return seg

    def _gc_graveyard(self):
        min_open = self._min_open_snapshot()
        changed = False
        for s in list(self.segments):
            if s.retired_at is None:
                continue
            if min_open is None or min_open >= s.retired_at:
                try:
                    (self.dir / "segments" / s.name).unlink()
                except FileNotFoundError:
                    pass
                self.segments.remove(s)
                self._handles.pop(s.name, None)
                self._group_cache = {
                    k: v for k, v in self._group_cache.items() if k[0] != s.name
                }
                self._delta_horizon = max(self._delta_horizon, s.retired_at)
                changed = True
        if changed:
            self._write_manifest()

    # --- change capture for incremental views ---

    def collect_deltas(self, lo, hi):
        """Lineage-tagged rows for commits in (lo, hi], collapsed per key.

        An update appears as delete(old image) + insert(new image) sharing
        the tuple key; deletes carry the retracted image's update_seq.
        """
        if hi <= lo:
            return []
        if 0 < lo < self._delta_horizon:
            raise SnapshotRetired(f"deltas from version {lo} predate retained history")
        changed = set()
        for key, entries in self.staging.items():
            for e in entries:
                if e.version is not None and lo < e.version <= hi:
                    changed.add(key)
                    break
        # candidate keys must come from every segment retained for `lo`, not
        # just those visible at `hi`: a merge drops superseded rows (and may
        # drop tombstones entirely), so mid-range changes survive only in the
        # graveyarded inputs a reader at `lo` still holds.
        for seg in self.segments:
            if seg.retired_at is not None and seg.retired_at <= lo:
                continue
            if seg.max_version <= lo or seg.min_version > hi:
                continue
            h = self._handle(seg)
            for gi in range(len(h.groups)):
                vers = self._group_col(seg, gi, COL_VER)
                kcols = [self._group_col(seg, gi, k) for k in self.pk]
                for i, v in enumerate(vers):
                    if lo < v <= hi:
                        changed.add(tuple(col[i] for col in kcols))
        deltas = []
        for key in sorted(changed):
            old = self._lookup_at(lo, key)
            new = self._lookup_at(hi, key)
            old_image = old[2] if old else None
            new_image = new[2] if new else None
            if old_image is None and new_image is None:
                continue
            if old is not None and new is not None and old[:2] == new[:2]:
                continue  # no change inside the range after collapsing
            if old_image is not None:
                deltas.append(DeltaRow(key, old[1], "delete", old_image))
            if new_image is not None:
                deltas.append(DeltaRow(key, new[1], "insert", new_image))
        deltas.sort(key=lambda d: (d.tuple_key, d.update_seq, d.kind))
        return deltas

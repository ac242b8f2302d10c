import random

import pytest

from minihouse import colfile
from minihouse.colfile import Predicate, TRUE_PREDICATE
from minihouse.engine import FlushPolicy, TableEngine
from minihouse.errors import SchemaMismatch, TxnClosed, UnknownColumn, UnknownTable, WriterBusy


def table_schema():
    return colfile.schema(
        [
            ("doc", "int", False),
            ("chunk", "int", False),
            ("body", "str", True),
            ("score", "float", True),
        ],
        sort_key=("doc", "chunk"),
        primary_key=("doc", "chunk"),
    )


@pytest.fixture
def eng(tmp_path):
    return TableEngine.create(tmp_path, "t", table_schema())


def put(eng, rows):
    txn = eng.begin_txn()
    eng.write_rows(txn, rows)
    return eng.commit(txn)


def drop(eng, keys):
    txn = eng.begin_txn()
    eng.delete_rows(txn, keys)
    return eng.commit(txn)


class MvccOracle:
    """Brute-force shadow of the engine: every (key, version, image)."""

    def __init__(self):
        self.events = []  # (version, seq, key, image-or-None)
        self.seq = 0
        self.version = 0

    def commit(self, changes):
        self.version += 1
        for key, image in changes:
            self.seq += 1
            self.events.append((self.version, self.seq, key, image))
        return self.version

    def visible(self, at):
        best = {}
        for version, seq, key, image in self.events:
            if version <= at:
                best[key] = image
        return {k: v for k, v in best.items() if v is not None}

    def scan(self, at, predicate=TRUE_PREDICATE):
        rows = [
            dict(v)
            for k, v in sorted(self.visible(at).items())
            if predicate.matches(v.get(predicate.column) if predicate.column else None)
        ]
        return rows


class TestWritePath:
    def test_uncommitted_rows_invisible(self, eng):
        txn = eng.begin_txn()
        eng.write_rows(txn, [{"doc": 1, "chunk": 0, "body": "x", "score": 1.0}])
        with eng.snapshot() as s:
            assert eng.scan(s) == []
            assert eng.point_lookup(s, (1, 0)) is None
        eng.commit(txn)
        with eng.snapshot() as s:
            assert eng.point_lookup(s, (1, 0))["body"] == "x"

    def test_last_image_wins_within_txn(self, eng):
        txn = eng.begin_txn()
        eng.write_rows(txn, [{"doc": 1, "chunk": 0, "body": "first", "score": None}])
        eng.write_rows(txn, [{"doc": 1, "chunk": 0, "body": "second", "score": None}])
        eng.commit(txn)
        with eng.snapshot() as s:
            assert eng.point_lookup(s, (1, 0))["body"] == "second"

    def test_single_writer(self, eng):
        eng.begin_txn()
        with pytest.raises(WriterBusy):
            eng.begin_txn()

    def test_txn_closed(self, eng):
        txn = eng.begin_txn()
        eng.commit(txn)
        with pytest.raises(TxnClosed):
            eng.write_rows(txn, [{"doc": 1, "chunk": 0}])
        with pytest.raises(TxnClosed):
            eng.commit(txn)

    def test_schema_validation(self, eng):
        txn = eng.begin_txn()
        with pytest.raises(SchemaMismatch):
            eng.write_rows(txn, [{"doc": 1, "chunk": 0, "nope": 3}])
        with pytest.raises(SchemaMismatch):
            eng.write_rows(txn, [{"doc": None, "chunk": 0}])
        with pytest.raises(SchemaMismatch):
            eng.write_rows(txn, [{"doc": 1, "chunk": 0, "body": 7}])


class TestCommit:
    def test_versions_strictly_increase(self, eng):
        v1 = put(eng, [{"doc": 1, "chunk": 0, "body": "a", "score": None}])
        v2 = put(eng, [{"doc": 2, "chunk": 0, "body": "b", "score": None}])
        assert v2 == v1 + 1

    def test_empty_txn_gets_a_version(self, eng):
        txn = eng.begin_txn()
        v = eng.commit(txn)
        assert v == 1
        with eng.snapshot() as s:
            assert eng.scan(s) == []

    def test_snapshot_excludes_later_commits(self, eng):
        put(eng, [{"doc": 1, "chunk": 0, "body": "a", "score": None}])
        snap = eng.snapshot()
        put(eng, [{"doc": 2, "chunk": 0, "body": "b", "score": None}])
        assert [r["doc"] for r in eng.scan(snap)] == [1]
        snap.close()


class TestWalReplay:
    def test_crash_replay_drops_uncommitted(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": 1, "chunk": 0, "body": "keep", "score": 1.0}])
        txn = eng.begin_txn()
        eng.write_rows(txn, [{"doc": 2, "chunk": 0, "body": "drop", "score": None}])
        # crash: no commit record; reopen from disk
        eng2 = TableEngine.open(tmp_path, "t")
        with eng2.snapshot() as s:
            rows = eng2.scan(s)
        assert [r["doc"] for r in rows] == [1]
        assert eng2.current_version == 1

    def test_replay_reproduces_every_snapshot(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        oracle = MvccOracle()
        rnd = random.Random(4)
        for step in range(8):
            changes = []
            txn = eng.begin_txn()
            for _ in range(rnd.randint(1, 5)):
                key = (rnd.randint(0, 5), 0)
                if rnd.random() < 0.25:
                    eng.delete_rows(txn, [key])
                    changes.append((key, None))
                else:
                    row = {"doc": key[0], "chunk": 0, "body": f"b{step}", "score": float(step)}
                    eng.write_rows(txn, [row])
                    changes.append((key, row))
            eng.commit(txn)
            oracle.commit(changes)
            if step == 4:
                eng.flush_staging(force=True)
        eng2 = TableEngine.open(tmp_path, "t")
        for v in range(0, 9):
            snap = eng2.snapshot_at(v)
            assert eng2.scan(snap) == oracle.scan(v), f"version {v}"
            snap.close()

    def test_torn_tail_record_ignored(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": 1, "chunk": 0, "body": "a", "score": None}])
        wal = tmp_path / "t" / "wal.log"
        data = wal.read_bytes()
        wal.write_bytes(data + b"\x20\x00\x00\x00\xde\xad")  # torn frame
        eng2 = TableEngine.open(tmp_path, "t")
        with eng2.snapshot() as s:
            assert len(eng2.scan(s)) == 1


class TestFlush:
    def test_below_thresholds_is_noop(self, eng):
        put(eng, [{"doc": 1, "chunk": 0, "body": "a", "score": None}])
        assert eng.flush_staging(FlushPolicy(max_rows=100, max_age=9999)) is None
        assert eng.live_segments() == []

    def test_flush_over_row_threshold(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        rows = [{"doc": i, "chunk": 0, "body": f"b{i}", "score": float(i)} for i in range(10_000)]
        put(eng, rows)
        with eng.snapshot() as s:
            before = {k: eng.point_lookup(s, k) for k in [(0, 0), (17, 0), (9999, 0)]}
        seg = eng.flush_staging(FlushPolicy(max_rows=1000, max_age=9999))
        assert seg is not None and seg.kind == "delta"
        assert eng.staging == {}
        with eng.snapshot() as s:
            after = {k: eng.point_lookup(s, k) for k in before}
        assert before == after

    def test_flush_by_age(self, tmp_path):
        fake = [0.0]
        eng = TableEngine.create(tmp_path, "t", table_schema(), clock=lambda: fake[0])
        put(eng, [{"doc": 1, "chunk": 0, "body": "a", "score": None}])
        assert eng.flush_staging(FlushPolicy(max_rows=10**6, max_age=10.0)) is None
        fake[0] = 11.0
        assert eng.flush_staging(FlushPolicy(max_rows=10**6, max_age=10.0)) is not None

    def test_flush_preserves_results_at_every_snapshot(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        oracle = MvccOracle()
        rnd = random.Random(6)
        for step in range(6):
            changes = []
            txn = eng.begin_txn()
            for _ in range(4):
                key = (rnd.randint(0, 7), rnd.randint(0, 1))
                row = {"doc": key[0], "chunk": key[1], "body": f"s{step}", "score": None}
                eng.write_rows(txn, [row])
                changes.append((key, row))
            eng.commit(txn)
            oracle.commit(changes)
        pre = {v: eng.scan(eng.snapshot_at(v)) for v in range(7)}
        eng.flush_staging(force=True)
        for v in range(7):
            assert eng.scan(eng.snapshot_at(v)) == pre[v] == oracle.scan(v)

    def test_flush_with_open_txn_keeps_pending_entries(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": 1, "chunk": 0, "body": "committed", "score": None}])
        txn = eng.begin_txn()
        eng.write_rows(txn, [{"doc": 2, "chunk": 0, "body": "pending", "score": None}])
        seg = eng.flush_staging(force=True)
        assert seg is not None  # only the committed entry was flushed
        eng.commit(txn)
        with eng.snapshot() as s:
            docs = {r["doc"] for r in eng.scan(s)}
        assert docs == {1, 2}
        # recovery after the interleaved flush sees the same state
        eng2 = TableEngine.open(tmp_path, "t")
        with eng2.snapshot() as s:
            assert {r["doc"] for r in eng2.scan(s)} == {1, 2}

    def test_flush_preserves_seq_order_within_segment(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        for i in range(3):
            put(eng, [{"doc": 1, "chunk": 0, "body": f"v{i}", "score": None}])
        seg = eng.flush_staging(force=True)
        h = eng._handle(seg)
        cols = colfile.read_columns(h)
        per_key_seqs = cols["__seq"]
        assert per_key_seqs == sorted(per_key_seqs)


class TestTieredLookup:
    def test_staging_beats_segments(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": 1, "chunk": 0, "body": "old", "score": None}])
        eng.flush_staging(force=True)
        put(eng, [{"doc": 1, "chunk": 0, "body": "new", "score": None}])
        with eng.snapshot() as s:
            assert eng.point_lookup(s, (1, 0))["body"] == "new"

    def test_delta_beats_stable(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": 1, "chunk": 0, "body": "stable", "score": None}])
        put(eng, [{"doc": 9, "chunk": 0, "body": "x", "score": None}])
        eng.flush_staging(force=True)
        eng.merge_segments([eng.live_delta_segments()[0].name])  # now a stable segment
        put(eng, [{"doc": 1, "chunk": 0, "body": "delta", "score": None}])
        eng.flush_staging(force=True)
        assert {s.kind for s in eng.live_segments()} == {"stable", "delta"}
        with eng.snapshot() as s:
            assert eng.point_lookup(s, (1, 0))["body"] == "delta"

    def test_tombstone_hides_stable_row(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": 1, "chunk": 0, "body": "x", "score": None}])
        eng.flush_staging(force=True)
        drop(eng, [(1, 0)])
        with eng.snapshot() as s:
            assert eng.point_lookup(s, (1, 0)) is None
            assert eng.scan(s) == []


class TestScan:
    def test_randomized_against_oracle(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        oracle = MvccOracle()
        rnd = random.Random(77)
        snapshots = []
        for step in range(40):
            txn = eng.begin_txn()
            changes = []
            for _ in range(rnd.randint(1, 6)):
                key = (rnd.randint(0, 30), rnd.randint(0, 2))
                if rnd.random() < 0.2:
                    eng.delete_rows(txn, [key])
                    changes.append((key, None))
                else:
                    row = {
                        "doc": key[0],
                        "chunk": key[1],
                        "body": rnd.choice(["a", "b", None]),
                        "score": rnd.choice([None, round(rnd.uniform(0, 5), 2)]),
                    }
                    eng.write_rows(txn, [row])
                    changes.append((key, row))
            eng.commit(txn)
            oracle.commit(changes)
            if step in (10, 20, 30):
                eng.flush_staging(force=True)
            if rnd.random() < 0.3:
                snapshots.append(eng.current_version)
        for v in snapshots + [eng.current_version]:
            snap = eng.snapshot_at(v)
            assert eng.scan(snap) == oracle.scan(v)
            for pred in (
                Predicate("doc", "<=", 10),
                Predicate("body", "==", "a"),
                Predicate("score", ">", 2.0),
            ):
                assert eng.scan(snap, pred) == oracle.scan(v, pred)
            snap.close()

    def test_snapshot_isolation_rereads_identically(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": i, "chunk": 0, "body": "x", "score": None} for i in range(5)])
        snap = eng.snapshot()
        first = eng.scan(snap)
        put(eng, [{"doc": 99, "chunk": 0, "body": "later", "score": None}])
        drop(eng, [(1, 0)])
        eng.flush_staging(force=True)
        assert eng.scan(snap) == first
        snap.close()

    def test_sort_key_predicate_prunes_groups(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        eng.group_target_rows = 10
        put(eng, [{"doc": i, "chunk": 0, "body": "x", "score": None} for i in range(100)])
        eng.flush_staging(force=True)
        eng.drop_caches()
        with eng.snapshot() as s:
            eng.reset_io()
            rows = eng.scan(s, Predicate("doc", ">=", 95))
            assert [r["doc"] for r in rows] == list(range(95, 100))
            stats = eng.io_stats()
        # 10 groups x 7 columns; only the final group's blocks may be read
        assert stats["block_reads"] <= 7

    def test_unknown_column(self, eng):
        with eng.snapshot() as s:
            with pytest.raises(UnknownColumn):
                eng.scan(s, Predicate("nope", "==", 1))
            with pytest.raises(UnknownColumn):
                eng.scan(s, TRUE_PREDICATE, projection=["nope"])

    def test_unknown_table(self, tmp_path):
        with pytest.raises(UnknownTable):
            TableEngine.open(tmp_path, "missing")


class TestCollectDeltas:
    def test_update_is_delete_plus_insert_sharing_key(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        v1 = put(eng, [{"doc": 1, "chunk": 0, "body": "a", "score": 1.0}])
        v2 = put(eng, [{"doc": 1, "chunk": 0, "body": "b", "score": 2.0}])
        ds = eng.collect_deltas(v1, v2)
        assert [d.kind for d in ds] == ["delete", "insert"]
        assert ds[0].tuple_key == ds[1].tuple_key == (1, 0)
        assert ds[0].update_seq < ds[1].update_seq
        assert ds[0].payload["body"] == "a" and ds[1].payload["body"] == "b"

    def test_collapse_within_range(self, tmp_path):
        eng = TableEngine.create(tmp_path, "t", table_schema())
        put(eng, [{"doc": 2, "chunk": 0, "body": "x", "score": None}])
        v = drop(eng, [(2, 0)])
        assert eng.collect_deltas(0, v) == []

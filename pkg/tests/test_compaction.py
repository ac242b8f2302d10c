import math
import random

import pytest

from minihouse import colfile
from minihouse.compaction import (
    CompactionDriver,
    ControllerConfig,
    MergePlan,
    execute_merge,
    intensity,
    plan_compaction,
)
from minihouse.engine import TableEngine
from minihouse.errors import InvalidConfig, SegmentRetired


def closed_form(n_delta, n_star, k):
    return min(1.0, max(0.0, k * (n_delta / n_star - 1.0)))


class TestIntensity:
    def test_equilibrium_is_zero(self):
        assert intensity(10, 10, 0.5) == 0.0
        assert intensity(3, 10, 2.0) == 0.0  # below equilibrium clamps at 0

    def test_hand_evaluations(self):
        assert intensity(30, 10, 0.5) == 1.0  # saturated
        assert intensity(14, 10, 0.5) == pytest.approx(0.2, rel=1e-12)
        assert intensity(14, 10, 0.5) == closed_form(14, 10, 0.5)

    def test_exactness_on_dense_grid(self):
        rnd = random.Random(123)
        for _ in range(10_000):
            n_delta = rnd.randint(0, 200)
            n_star = rnd.randint(1, 50)
            k = rnd.uniform(0.01, 4.0)
            got = intensity(n_delta, n_star, k)
            want = closed_form(n_delta, n_star, k)
            assert abs(got - want) <= math.ulp(max(got, want, 1.0))
            if n_delta <= n_star:
                assert got == 0.0

    def test_monotonicity(self):
        for n_star in (1, 5, 20):
            values = [intensity(n, n_star, 0.7) for n in range(0, 100)]
            assert values == sorted(values)
        for n in (25, 60):
            values = [intensity(n, s, 0.7) for s in range(1, 50)]
            assert values == sorted(values, reverse=True)

    def test_invalid_config(self):
        with pytest.raises(InvalidConfig):
            intensity(5, 0, 0.5)
        with pytest.raises(InvalidConfig):
            ControllerConfig(n_star=0)
        with pytest.raises(InvalidConfig):
            ControllerConfig(k=0)
        with pytest.raises(InvalidConfig):
            ControllerConfig(max_batch=1)


class FakeSeg:
    def __init__(self, name, min_version):
        self.name = name
        self.min_version = min_version


class TestPlan:
    def test_zero_alpha_empty_plan(self):
        cfg = ControllerConfig()
        assert plan_compaction([FakeSeg("a", 1), FakeSeg("b", 2)], 0.0, cfg) is None

    def test_saturation_takes_max_batch_oldest(self):
        cfg = ControllerConfig(max_batch=16)
        segs = [FakeSeg(f"s{i}", 100 - i) for i in range(20)]
        plan = plan_compaction(segs, 1.0, cfg)
        assert plan.batch_size == 16
        assert len(plan.inputs) == 16
        # oldest first: lowest min_version
        assert plan.inputs[0] == "s19"

    def test_batch_monotone_in_alpha(self):
        cfg = ControllerConfig(max_batch=16)
        segs = [FakeSeg(f"s{i}", i) for i in range(30)]
        batches = []
        for i in range(11):
            alpha = i / 10
            plan = plan_compaction(segs, alpha, cfg)
            batches.append(plan.batch_size if plan else 0)
        assert batches == sorted(batches)
        assert batches[-1] == 16

    def test_period_interpolates(self):
        cfg = ControllerConfig(base_period=8.0, min_period=1.0)
        segs = [FakeSeg(f"s{i}", i) for i in range(30)]
        p_low = plan_compaction(segs, 0.1, cfg).period
        p_high = plan_compaction(segs, 0.9, cfg).period
        assert p_low == pytest.approx(8.0 * 0.9 + 1.0 * 0.1)
        assert p_high == pytest.approx(8.0 * 0.1 + 1.0 * 0.9)
        assert p_high < p_low


def engine_with_deltas(tmp_path, n_deltas, rows_per_delta=2):
    sd = colfile.schema(
        [("doc", "int", False), ("chunk", "int", False), ("v", "int", True)],
        sort_key=("doc", "chunk"),
        primary_key=("doc", "chunk"),
    )
    eng = TableEngine.create(tmp_path, "t", sd)
    rnd = random.Random(1)
    key = 0
    for _ in range(n_deltas):
        txn = eng.begin_txn()
        for _ in range(rows_per_delta):
            eng.write_rows(txn, [{"doc": key % 17, "chunk": key // 17, "v": rnd.randint(0, 9)}])
            key += 1
        eng.commit(txn)
        eng.flush_staging(force=True)
    return eng


class TestExecuteMerge:
    def test_pre_merge_snapshot_unchanged(self, tmp_path):
        eng = engine_with_deltas(tmp_path, 6)
        snap = eng.snapshot()
        before = eng.scan(snap)
        plan = plan_compaction(eng.live_delta_segments(), 1.0, ControllerConfig(max_batch=4))
        seg = execute_merge(plan, eng)
        assert seg.kind == "stable"
        assert eng.scan(snap) == before
        snap.close()

    def test_post_merge_scan_equals_pre_merge_at_same_version(self, tmp_path):
        eng = engine_with_deltas(tmp_path, 6)
        v = eng.current_version
        before = eng.scan(eng.snapshot_at(v))
        plan = plan_compaction(eng.live_delta_segments(), 1.0, ControllerConfig(max_batch=8))
        execute_merge(plan, eng)
        assert eng.scan(eng.snapshot_at(v)) == before

    def test_tombstone_resolution_in_merge(self, tmp_path):
        sd = colfile.schema(
            [("doc", "int", False), ("chunk", "int", False), ("v", "int", True)],
            sort_key=("doc", "chunk"),
            primary_key=("doc", "chunk"),
        )
        eng = TableEngine.create(tmp_path, "t", sd)
        txn = eng.begin_txn()
        eng.write_rows(txn, [{"doc": 1, "chunk": 0, "v": 5}])
        eng.commit(txn)
        eng.flush_staging(force=True)  # delta A: insert
        txn = eng.begin_txn()
        eng.delete_rows(txn, [(1, 0)])
        eng.commit(txn)
        eng.flush_staging(force=True)  # delta B: tombstone
        names = [s.name for s in eng.live_delta_segments()]
        seg = execute_merge(MergePlan(names, 2, 1.0, 1.0), eng)
        # merge oracle: newest image is a tombstone and no other live
        # segment exists, so the key is entirely absent from the output
        h = eng._handle(seg)
        assert h.total_rows == 0
        with eng.snapshot() as s:
            assert eng.point_lookup(s, (1, 0)) is None

    def test_merge_input_raced(self, tmp_path):
        eng = engine_with_deltas(tmp_path, 4)
        names = [s.name for s in eng.live_delta_segments()]
        eng.merge_segments(names[:2])
        with pytest.raises(SegmentRetired):
            execute_merge(MergePlan(names, 4, 1.0, 1.0), eng)

    def test_graveyard_retention_until_snapshot_release(self, tmp_path):
        eng = engine_with_deltas(tmp_path, 4)
        snap = eng.snapshot()
        names = [s.name for s in eng.live_delta_segments()]
        before = eng.scan(snap)
        eng.merge_segments(names)
        retired = [s for s in eng.segments if s.retired_at is not None]
        assert retired, "inputs stay in the graveyard while the snapshot is open"
        assert eng.scan(snap) == before
        snap.close()
        assert [s for s in eng.segments if s.retired_at is not None] == []


class TestSteadyState:
    def test_driver_keeps_delta_count_bounded(self, tmp_path):
        sd = colfile.schema(
            [("doc", "int", False), ("chunk", "int", False), ("v", "int", True)],
            sort_key=("doc", "chunk"),
            primary_key=("doc", "chunk"),
        )
        eng = TableEngine.create(tmp_path, "t", sd)
        cfg = ControllerConfig(n_star=5, k=0.5, max_batch=6)
        driver = CompactionDriver(eng, cfg)
        lo, hi = 10**9, 0
        for tick in range(1, 400):
            txn = eng.begin_txn()
            eng.write_rows(txn, [{"doc": tick, "chunk": 0, "v": 1}])
            eng.commit(txn)
            eng.flush_staging(force=True)
            driver.tick()
            n = len(eng.live_delta_segments())
            if tick > 60:
                lo, hi = min(lo, n), max(hi, n)
        assert cfg.n_star <= lo and hi <= cfg.n_star + cfg.max_batch, (lo, hi)

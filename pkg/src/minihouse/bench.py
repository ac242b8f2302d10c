"""Scaled-down benchmark/verification workloads behind the `bench` CLI.

Every workload is driven by one seeded RNG and reports only values that
are functions of the seed, so `bench --seed N --json` output is byte
identical across runs. Wall-clock durations and event traces go into the
side-channel `extras` (report CSV and figures), never into the JSON.
"""

import json
import random
import shutil
import string
import tempfile
import time
from pathlib import Path

from . import colfile
from .colfile import Predicate
from .compaction import CompactionDriver, ControllerConfig
from .engine import TableEngine
from .hybrid import FusionSpec, RankedList, execute_hybrid, fuse_rrf
from .ivm import (
    AggregateNode,
    FilterNode,
    JoinNode,
    MaterializedView,
    SourceNode,
    ViewDefinition,
    recompute_view,
)

_WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima "
    "mike november oscar papa quebec romeo sierra tango uniform victor whiskey"
).split()


# --- randomized table generation (shared with the test suite) ---


def random_scalar(rnd, vtype):
    if vtype == "int":
        return rnd.randint(-(10**9), 10**9)
    if vtype == "float":
        if rnd.random() < 0.5:
            return round(rnd.uniform(-1000, 1000), rnd.randint(0, 4))
        return rnd.uniform(-1e6, 1e6)
    return "".join(rnd.choice(string.ascii_lowercase) for _ in range(rnd.randint(0, 12)))


def random_table(rnd, max_rows=40):
    """A random schema + column data: mixed types, nulls, vectors,
    optionally a sort key (data then arrives sorted)."""
    n_rows = rnd.randint(0, max_rows)
    cols = [("k0", "int", False)]
    for i in range(rnd.randint(1, 4)):
        vtype = rnd.choice(["int", "float", "str", "vec"])
        cols.append((f"c{i}", vtype, True))
    use_sort = rnd.random() < 0.7
    sd = colfile.schema(cols, sort_key=("k0",) if use_sort else ())
    data = {}
    for name, vtype, nullable in cols:
        vals = []
        for _ in range(n_rows):
            if nullable and rnd.random() < 0.15:
                vals.append(None)
            elif vtype == "vec":
                vals.append([rnd.uniform(-1, 1) for _ in range(rnd.randint(0, 6))])
            else:
                vals.append(random_scalar(rnd, vtype))
        data[name] = vals
    if use_sort:
        data["k0"].sort()
    return data, sd


# --- workloads ---


def bench_format(rnd, n_tables=60):
    roundtrip_failures = 0
    flip_misses = 0
    for _ in range(n_tables):
        data, sd = random_table(rnd)
        blob, _ = colfile.write_file(data, sd, group_target_rows=rnd.choice([4, 8, 16]))
        h = colfile.open_file(blob)
        if colfile.read_columns(h) != data:
            roundtrip_failures += 1
        bit = rnd.randrange(len(blob) * 8)
        mutated = bytearray(blob)
        mutated[bit // 8] ^= 1 << (bit % 8)
        try:
            h2 = colfile.open_file(bytes(mutated))
            report = colfile.verify_integrity(h2)
            if all(v == "ok" for v in report.values()):
                flip_misses += 1
        except Exception:
            pass  # detection at open counts
    return {"tables": n_tables, "roundtrip_failures": roundtrip_failures, "flip_misses": flip_misses}


def bench_lookup(rnd, rows=4000, lookups=500):
    keys = list(range(rows))
    data = {
        "k0": keys,
        "c0": [rnd.randint(0, 10**6) for _ in keys],
        "c1": [random_scalar(rnd, "str") for _ in keys],
    }
    sd = colfile.schema(
        [("k0", "int", False), ("c0", "int", True), ("c1", "str", True)], sort_key=("k0",)
    )
    blob, _ = colfile.write_file(data, sd, group_target_rows=512, block_target_rows=128)
    h = colfile.open_file(blob)
    worst = 0
    for _ in range(lookups):
        key = (rnd.choice(keys),)
        before = h.io.block_reads
        hits = colfile.locate_key(h, key)
        per_col = 0
        for _, refs in hits:
            for name, ref_list in refs.items():
                for ref in ref_list:
                    colfile.read_block(h, ref, h.column_type(name))
                per_col = max(per_col, len(ref_list))
        reads = h.io.block_reads - before
        worst = max(worst, per_col)
        assert reads >= 1
    return {
        "lookups": lookups,
        "max_block_reads_per_column": worst,
        "total_block_reads": h.io.block_reads,
        "total_bytes_read": h.io.bytes_read,
    }


def bench_compaction(rnd, ticks=300, check_every=25):
    workdir = Path(tempfile.mkdtemp(prefix="mh-bench-"))
    try:
        sd = colfile.schema(
            [("doc", "int", False), ("chunk", "int", False), ("v", "int", True)],
            sort_key=("doc", "chunk"),
            primary_key=("doc", "chunk"),
        )
        eng = TableEngine.create(workdir, "tb", sd)
        cfg = ControllerConfig(n_star=10, k=0.5, max_batch=8)
        driver = CompactionDriver(eng, cfg)
        retained = []
        scans = {}
        trace = []
        violations = 0
        merges = 0
        lo_after, hi_after = 10**9, 0
        for tick in range(1, ticks + 1):
            txn = eng.begin_txn()
            eng.write_rows(txn, [{"doc": tick, "chunk": 0, "v": rnd.randint(0, 99)}])
            eng.commit(txn)
            eng.flush_staging(force=True)
            entry = driver.tick()
            if entry.merged:
                merges += 1
                if merges % check_every == 0:
                    for snap in retained:
                        if eng.scan(snap) != scans[snap.version]:
                            violations += 1
            n = len(eng.live_delta_segments())
            trace.append(n)
            if tick % 60 == 0:
                snap = eng.snapshot()
                retained.append(snap)
                scans[snap.version] = eng.scan(snap)
                if len(retained) > 3:
                    old = retained.pop(0)
                    scans.pop(old.version, None)
                    old.close()
            if tick > 100:
                lo_after, hi_after = min(lo_after, n), max(hi_after, n)
        return {
            "ticks": ticks,
            "merges": merges,
            "delta_min_after_warmup": lo_after,
            "delta_max_after_warmup": hi_after,
            "snapshot_violations": violations,
        }, {"trace": trace, "n_star": cfg.n_star, "max_batch": cfg.max_batch}
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def _ivm_pair(workdir, rnd, n_orders, n_items):
    orders_sd = colfile.schema(
        [("doc", "int", False), ("chunk", "int", False), ("status", "str", True), ("qty", "int", True)],
        sort_key=("doc", "chunk"),
        primary_key=("doc", "chunk"),
    )
    items_sd = colfile.schema(
        [("idoc", "int", False), ("ichunk", "int", False), ("odoc", "int", True), ("amount", "float", True)],
        sort_key=("idoc", "ichunk"),
        primary_key=("idoc", "ichunk"),
    )
    orders = TableEngine.create(workdir, "orders", orders_sd)
    items = TableEngine.create(workdir, "items", items_sd)
    txn = orders.begin_txn()
    orders.write_rows(
        txn,
        [
            {"doc": i, "chunk": 0, "status": rnd.choice(["open", "done"]), "qty": rnd.randint(0, 9)}
            for i in range(n_orders)
        ],
    )
    orders.commit(txn)
    txn = items.begin_txn()
    items.write_rows(
        txn,
        [
            {
                "idoc": i,
                "ichunk": 0,
                "odoc": rnd.randrange(max(1, n_orders)),
                "amount": round(rnd.uniform(0, 100), 2),
            }
            for i in range(n_items)
        ],
    )
    items.commit(txn)
    return orders, items


def _ivm_mutate(engine, rnd, ratio, id_range):
    """Update/insert/delete ~ratio of rows; returns rows touched."""
    with engine.snapshot() as snap:
        current = engine.scan(snap)
    n = max(1, int(len(current) * ratio)) if current else 0
    txn = engine.begin_txn()
    touched = 0
    for row in rnd.sample(current, min(n, len(current))):
        action = rnd.random()
        if action < 0.2:
            engine.delete_rows(txn, [tuple(row[c] for c in engine.pk)])
        else:
            new = dict(row)
            if "qty" in new:
                new["qty"] = rnd.randint(0, 9)
                new["status"] = rnd.choice(["open", "done"])
            else:
                new["amount"] = round(rnd.uniform(0, 100), 2)
                new["odoc"] = rnd.randrange(id_range)
            engine.write_rows(txn, [new])
        touched += 1
    engine.commit(txn)
    return touched


def _ivm_view(orders, items):
    plan = AggregateNode(
        JoinNode(
            FilterNode(SourceNode("orders"), "qty", ">=", 2),
            SourceNode("items"),
            ("doc", "odoc"),
            "inner",
        ),
        ("status",),
        (("n", "count", ""), ("total", "sum", "amount"), ("mean", "avg", "amount")),
    )
    definition = ViewDefinition("bench_view", plan, ("orders", "items"))
    return MaterializedView(definition, {"orders": orders, "items": items})


def bench_ivm(rnd, seeds=20, rows=120, refreshes=3):
    mismatches = 0
    for s in range(seeds):
        sub = random.Random(rnd.randrange(2**32))
        workdir = Path(tempfile.mkdtemp(prefix="mh-ivm-"))
        try:
            orders, items = _ivm_pair(workdir, sub, rows, rows)
            view = _ivm_view(orders, items)
            for _ in range(refreshes):
                view.refresh()
                if view.multiset() != recompute_view(view.definition, view.engines):
                    mismatches += 1
                _ivm_mutate(orders, sub, 0.2 * sub.random(), rows)
                _ivm_mutate(items, sub, 0.2 * sub.random(), rows)
            view.refresh()
            if view.multiset() != recompute_view(view.definition, view.engines):
                mismatches += 1
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    ratios = {}
    for ratio in (0.025, 0.05, 0.10):
        sub = random.Random(rnd.randrange(2**32))
        workdir = Path(tempfile.mkdtemp(prefix="mh-ivm-"))
        try:
            orders, items = _ivm_pair(workdir, sub, 400, 400)
            view = _ivm_view(orders, items)
            view.refresh()  # initial load
            _ivm_mutate(items, sub, ratio, 400)
            before = (view.total.delta_rows, view.total.probe_matches)
            view.refresh()
            inc = (view.total.delta_rows - before[0]) + (view.total.probe_matches - before[1])
            with orders.snapshot() as s1, items.snapshot() as s2:
                full = len(orders.scan(s1)) + len(items.scan(s2))
            ratios[f"{ratio:g}"] = round(inc / full, 4)
        finally:
            shutil.rmtree(workdir, ignore_errors=True)
    return {"seeds": seeds, "mismatches": mismatches, "work_ratio": ratios}


def bench_fusion(rnd, trials=200):
    max_err = 0.0
    invariance_failures = 0
    for _ in range(trials):
        ids = list(range(rnd.randint(1, 30)))
        lists = []
        for label in ("a", "b"):
            chosen = rnd.sample(ids, rnd.randint(0, len(ids)))
            lists.append(RankedList(label, [(i, rnd.random()) for i in chosen]))
        fused = fuse_rrf(lists, 60.0)
        ranks = [rl.ranks() for rl in lists]
        for rid, score in fused.entries:
            direct = sum(1.0 / (60.0 + r[rid]) for r in ranks if rid in r)
            max_err = max(max_err, abs(score - direct))
        # strictly monotone transform of raw scores leaves output unchanged
        transformed = [
            RankedList(rl.label, [(rid, 3.0 * s + 7.0) for rid, s in rl.entries]) for rl in lists
        ]
        if fuse_rrf(transformed, 60.0).entries != fused.entries:
            invariance_failures += 1

    # constructed corpus: half the relevant items match only lexically,
    # half only semantically; hybrid recall must beat both legs
    dim = 8
    rel_sem = [(("s", i), {"jk": 0, "emb": [1.0] + [0.001 * i] * (dim - 1), "body": "noise"}) for i in range(30)]
    rel_lex = [
        (("l", i), {"jk": 0, "emb": [rnd.gauss(0, 1) for _ in range(dim)], "body": "needle target"})
        for i in range(30)
    ]
    noise = [
        (("n", i), {"jk": 0, "emb": [rnd.gauss(0, 1) for _ in range(dim)], "body": "filler words"})
        for i in range(500)
    ]
    docs = rel_sem + rel_lex + noise
    relevant = {rid for rid, _ in rel_sem + rel_lex}
    labels = [{"lk": 0, "tag": "x"}]
    spec = FusionSpec(mode="rrf", k=60.0, top_k=100)
    res = execute_hybrid(
        docs, labels, ("jk", "lk"), None, spec, [1.0] + [0.0] * (dim - 1), ["needle", "target"],
        use_runtime_filter=False,
    )
    from .hybrid import text_topk, vector_topk

    vtop = {rid for rid, _ in vector_topk([1.0] + [0.0] * (dim - 1), docs, "emb", 100).entries}
    ttop = {rid for rid, _ in text_topk(["needle", "target"], docs, "body", 100).entries}
    hybrid_ids = {rid for rid, _ in res.fused.entries}
    recall = {
        "vector": len(vtop & relevant) / len(relevant),
        "text": len(ttop & relevant) / len(relevant),
        "hybrid": len(hybrid_ids & relevant) / len(relevant),
    }
    return {
        "trials": trials,
        "rrf_max_abs_err": max_err,
        "rank_invariance_failures": invariance_failures,
        "recall_at_100": recall,
    }


def bench_hybrid(rnd, corpora=40, dim=8):
    mismatches = 0
    for _ in range(corpora):
        n = rnd.randint(50, 150)
        docs = [
            (
                (i, 0),
                {
                    "jk": i % 40,
                    "emb": None if rnd.random() < 0.1 else [rnd.gauss(0, 1) for _ in range(dim)],
                    "body": " ".join(rnd.choice(_WORDS) for _ in range(8)),
                },
            )
            for i in range(n)
        ]
        labels = [{"lk": i, "tag": rnd.choice(["a", "b", "c"])} for i in range(40)]
        spec = FusionSpec(mode=rnd.choice(["rrf", "score"]), weights=(0.6, 0.4), k=60.0, top_k=10)
        q = [rnd.gauss(0, 1) for _ in range(dim)]
        terms = [rnd.choice(_WORDS), rnd.choice(_WORDS)]
        pred = Predicate("tag", "==", rnd.choice(["a", "b", "c"]))
        kind = rnd.choice(["bloom", "bitmap"])
        r_on = execute_hybrid(docs, labels, ("jk", "lk"), pred, spec, q, terms,
                              use_runtime_filter=True, filter_kind=kind, selectivity_threshold=1.1)
        r_off = execute_hybrid(docs, labels, ("jk", "lk"), pred, spec, q, terms,
                               use_runtime_filter=False)
        if [e[0] for e in r_on.fused.entries] != [e[0] for e in r_off.fused.entries]:
            mismatches += 1

    # counter reduction at ~1% selectivity
    n = 4000
    docs = [
        ((i, 0), {"jk": i, "emb": [rnd.gauss(0, 1) for _ in range(dim)], "body": rnd.choice(_WORDS)})
        for i in range(n)
    ]
    labels = [{"lk": i, "tag": "hot" if i % 100 == 0 else "cold"} for i in range(n)]
    spec = FusionSpec(mode="rrf", top_k=10)
    pred = Predicate("tag", "==", "hot")
    q = [rnd.gauss(0, 1) for _ in range(dim)]
    on = execute_hybrid(docs, labels, ("jk", "lk"), pred, spec, q, ["alpha"], use_runtime_filter=True)
    off = execute_hybrid(docs, labels, ("jk", "lk"), pred, spec, q, ["alpha"], use_runtime_filter=False)
    same = [e[0] for e in on.fused.entries] == [e[0] for e in off.fused.entries]
    factor = off.counters.scored_rows / max(1, on.counters.scored_rows)
    return {
        "corpora": corpora,
        "result_mismatches": mismatches + (0 if same else 1),
        "scored_rows_with_filter": on.counters.scored_rows,
        "scored_rows_without_filter": off.counters.scored_rows,
        "reduction_factor": round(factor, 2),
    }


def bench_cache(rnd):
    from .cache import CachePlane, HashRing

    workdir = Path(tempfile.mkdtemp(prefix="mh-cache-"))
    try:
        KB = 1024
        plane = CachePlane(
            workdir / "backend",
            nodes=3,
            block_bytes=48 * KB,
            chunk_bytes=16 * KB,
            region_bytes=8 * KB,
            segment_bytes=2 * KB,
            region_capacity=64,
            buffer_frames=64,
        )
        data = bytes(rnd.getrandbits(8) for _ in range(96 * KB))
        plane.write_file("bench.bin", data)
        byte_equal = (workdir / "backend" / "bench.bin").read_bytes() == data
        fuzz_failures = 0
        for _ in range(500):
            off = rnd.randrange(0, len(data))
            ln = rnd.randrange(0, len(data) - off)
            if plane.read_range("bench.bin", off, ln) != data[off : off + ln]:
                fuzz_failures += 1
        s = plane.stats()
        balanced = (
            sum(s[t]["bytes_served"] for t in ("buffer", "region", "shared", "backend"))
            == s["bytes_requested"]
        )
        before = plane.backend.reads
        for off in range(0, len(data), 4 * KB):
            plane.read_range("bench.bin", off, 4 * KB)
        second_pass_reads = plane.backend.reads - before

        ring = HashRing([f"n{i}" for i in range(10)])
        keys = [f"key{i}" for i in range(10000)]
        owners = {k: ring.place(k) for k in keys}
        ring.remove_node("n4")
        moved = sum(1 for k in keys if ring.place(k) != owners[k])
        final = plane.stats()
        tier_requests = {
            t: {"hits": final[t]["hits"], "misses": final[t]["misses"]}
            for t in ("buffer", "region", "shared", "backend")
        }
        buf = tier_requests["buffer"]
        hit_ratio = buf["hits"] / max(1, buf["hits"] + buf["misses"])
        return {
            "write_byte_equal": byte_equal,
            "fuzz_failures": fuzz_failures,
            "accounting_balanced": balanced,
            "second_pass_backend_reads": second_pass_reads,
            "remap_fraction": moved / len(keys),
            "buffer_hit_ratio": round(hit_ratio, 4),
            "tier_requests": tier_requests,
        }, {"tier_bytes": {t: final[t]["bytes_served"] for t in ("buffer", "region", "shared", "backend")}}
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def run_bench(seed=42, quick=False):
    """Run every workload; returns (deterministic metrics, extras)."""
    rnd = random.Random(seed)
    scale = 0.3 if quick else 1.0
    metrics = {"seed": seed}
    extras = {"durations": {}}

    def timed(name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(random.Random(rnd.randrange(2**32)), *args, **kwargs)
        extras["durations"][name] = round(time.perf_counter() - t0, 3)
        return out

    metrics["format"] = timed("format", bench_format, n_tables=max(10, int(60 * scale)))
    metrics["lookup"] = timed("lookup", bench_lookup, lookups=max(100, int(500 * scale)))
    comp, comp_extra = timed("compaction", bench_compaction, ticks=max(120, int(300 * scale)))
    metrics["compaction"] = comp
    extras["compaction"] = comp_extra
    metrics["ivm"] = timed("ivm", bench_ivm, seeds=max(6, int(20 * scale)))
    metrics["fusion"] = timed("fusion", bench_fusion, trials=max(50, int(200 * scale)))
    metrics["hybrid"] = timed("hybrid", bench_hybrid, corpora=max(10, int(40 * scale)))
    cache, cache_extra = timed("cache", bench_cache)
    metrics["cache"] = cache
    extras["cache"] = cache_extra
    return metrics, extras


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    else:
        rows.append((prefix, obj))


def write_report(metrics, extras, out_dir):
    """Delimited metrics plus rendered figures; returns written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    rows = []
    _flatten("", metrics, rows)
    for name, dur in extras.get("durations", {}).items():
        rows.append((f"duration_seconds.{name}", dur))
    csv_path = out / "bench_metrics.csv"
    with open(csv_path, "w") as fh:
        fh.write("metric,value\n")
        for key, value in rows:
            fh.write(f"{key},{value}\n")
    written.append(csv_path)

    comp = extras.get("compaction")
    if comp:
        fig, ax = plt.subplots(figsize=(7, 3.2))
        ax.plot(range(1, len(comp["trace"]) + 1), comp["trace"], lw=1.0, label="live deltas")
        ax.axhline(comp["n_star"], color="green", ls="--", lw=0.8, label="equilibrium")
        ax.axhline(comp["n_star"] + comp["max_batch"], color="red", ls="--", lw=0.8, label="bound")
        ax.set_xlabel("tick")
        ax.set_ylabel("delta segments")
        ax.legend(fontsize=8)
        fig.tight_layout()
        p = out / "compaction_trace.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)

    cache = extras.get("cache")
    if cache:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        tiers = list(cache["tier_bytes"])
        ax.bar(tiers, [cache["tier_bytes"][t] for t in tiers], color="#4878b0")
        ax.set_ylabel("bytes served")
        fig.tight_layout()
        p = out / "cache_tiers.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)

    ivm = metrics.get("ivm", {}).get("work_ratio")
    if ivm:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        labels = list(ivm)
        ax.bar(labels, [ivm[k] for k in labels], color="#b04878")
        ax.axhline(0.3, color="red", ls="--", lw=0.8, label="bound 0.3")
        ax.set_xlabel("update ratio")
        ax.set_ylabel("incremental / full-scan rows")
        ax.legend(fontsize=8)
        fig.tight_layout()
        p = out / "ivm_work_ratio.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)

    recall = metrics.get("fusion", {}).get("recall_at_100")
    if recall:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        names = list(recall)
        ax.bar(names, [recall[k] for k in names], color="#48b078")
        ax.set_ylabel("recall@100")
        ax.set_ylim(0, 1.05)
        fig.tight_layout()
        p = out / "hybrid_recall.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)

    return written


def metrics_json(metrics):
    return json.dumps(metrics, sort_keys=True, indent=1)

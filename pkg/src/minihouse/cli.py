"""minihouse command line: ingestion, lookup, hybrid query, compaction,
view maintenance, integrity checks, cache inspection, and benchmarks.

Exit codes: 0 success, 1 user error, 2 data corruption. `--json` switches
a command to machine-readable output; all randomness is seedable.
"""

import json
import random
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import colfile
from .colfile import Predicate
from .compaction import CompactionDriver, ControllerConfig
from .config import find_config
from .engine import FlushPolicy, TableEngine, schema_from_json
from .errors import (
    BadMagic,
    BlockChecksumMismatch,
    CorruptDescriptor,
    FooterChecksumMismatch,
    MinihouseError,
)
from .hybrid import FusionSpec, execute_hybrid
from .ivm import MaterializedView, RefreshConfig, parse_view_text, refresh_trace

click.exceptions.UsageError.exit_code = 1

_CORRUPTION = (BadMagic, FooterChecksumMismatch, BlockChecksumMismatch, CorruptDescriptor)


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(2 if isinstance(exc, _CORRUPTION) else 1)


def _emit(obj, as_json):
    if as_json:
        click.echo(json.dumps(obj, sort_keys=True, indent=1))
    else:
        for line in _pretty(obj):
            click.echo(line)


def _pretty(obj, indent=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)):
                yield f"{indent}{k}:"
                yield from _pretty(v, indent + "  ")
            else:
                yield f"{indent}{k}: {v}"
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                yield from _pretty(v, indent + "  ")
            else:
                yield f"{indent}- {v}"
    else:
        yield f"{indent}{obj}"


def _parse_scalar(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_where(text):
    for op in ("!=", "<=", ">=", "=", "<", ">"):
        if op in text:
            col, val = text.split(op, 1)
            return Predicate(col.strip(), "==" if op == "=" else op, _parse_scalar(val.strip()))
    raise click.UsageError(f"cannot parse predicate {text!r}")


def _apply_codec_overrides(sd, table, config):
    """Honor `codec.<table>.<column> = <name>` config entries at creation."""
    from dataclasses import replace

    from .encodings import CODEC_NAMES

    by_name = {name: cid for cid, name in CODEC_NAMES.items()}
    cols = []
    for c in sd.columns:
        wanted = config.get(f"codec.{table}.{c.name}")
        if wanted is not None:
            if wanted not in by_name:
                raise click.UsageError(f"unknown codec {wanted!r} for {table}.{c.name}")
            cols.append(replace(c, codec=by_name[wanted]))
        else:
            cols.append(c)
    return type(sd)(tuple(cols), sd.sort_key, sd.primary_key)


class Workspace:
    def __init__(self, root, config_path):
        self.root = Path(root)
        self.config = find_config(self.root, config_path)

    def tables_dir(self):
        return self.root / "tables"

    def views_dir(self):
        return self.root / "views"

    def cache_root(self):
        import os

        return Path(os.environ.get("MINIHOUSE_CACHE_ROOT", self.root / "cache"))

    def open_table(self, name):
        return TableEngine.open(self.tables_dir(), name)

    def table_names(self):
        d = self.tables_dir()
        if not d.is_dir():
            return []
        return sorted(p.name for p in d.iterdir() if (p / "manifest.json").exists())

    def view_names(self):
        d = self.views_dir()
        if not d.is_dir():
            return []
        return sorted(p.stem for p in d.glob("*.view"))


@click.group()
@click.option("--root", envvar="MINIHOUSE_ROOT", default="./minihouse_data", show_default=True)
@click.option("--config", "config_path", default=None, help="Config file (key = value lines).")
@click.pass_context
def main(ctx, root, config_path):
    """An embeddable analytical table engine at desk scale."""
    ctx.obj = Workspace(root, config_path)


@main.command()
@click.option("--table", required=True)
@click.option("--input", "input_path", required=True, help="JSON-lines rows ('-' for stdin).")
@click.option("--schema", "schema_path", default=None, help="Schema JSON (required for a new table).")
@click.option("--flush/--no-flush", default=True, help="Flush staging per policy after ingest.")
@click.option("--force-flush", is_flag=True, help="Flush regardless of thresholds.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def ingest(ws, table, input_path, schema_path, flush, force_flush, as_json):
    """Append JSON-lines rows to a table in one transaction."""
    try:
        try:
            eng = ws.open_table(table)
        except MinihouseError:
            if schema_path is None:
                raise click.UsageError(f"table {table!r} does not exist; pass --schema to create it")
            sd = schema_from_json(json.loads(Path(schema_path).read_text()))
            sd = _apply_codec_overrides(sd, table, ws.config)
            ws.tables_dir().mkdir(parents=True, exist_ok=True)
            eng = TableEngine.create(ws.tables_dir(), table, sd)
        if input_path == "-":
            lines = sys.stdin.read().splitlines()
        else:
            lines = Path(input_path).read_text().splitlines()
        rows = [json.loads(ln) for ln in lines if ln.strip()]
        txn = eng.begin_txn()
        deletes = [r["_delete"] for r in rows if "_delete" in r]
        inserts = [r for r in rows if "_delete" not in r]
        if inserts:
            eng.write_rows(txn, inserts)
        if deletes:
            eng.delete_rows(txn, [tuple(k) for k in deletes])
        version = eng.commit(txn)
        policy = FlushPolicy(
            max_rows=ws.config.get("flush.max_rows", FlushPolicy.max_rows),
            max_age=ws.config.get("flush.max_age", FlushPolicy.max_age),
        )
        seg = eng.flush_staging(policy, force=force_flush) if flush else None
        _emit(
            {
                "table": table,
                "rows": len(inserts),
                "deletes": len(deletes),
                "version": version,
                "flushed_segment": seg.name if seg else None,
            },
            as_json,
        )
    except click.UsageError:
        raise
    except MinihouseError as exc:
        _fail(exc)


@main.command()
@click.option("--table", required=True)
@click.option("--doc", required=True)
@click.option("--chunk", required=True)
@click.option("--at", "at_version", type=int, default=None, help="Read at a past version.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def lookup(ws, table, doc, chunk, at_version, as_json):
    """Point lookup by (document, chunk) key."""
    try:
        eng = ws.open_table(table)
        snap = eng.snapshot() if at_version is None else eng.snapshot_at(at_version)
        try:
            row = eng.point_lookup(snap, (_parse_scalar(doc), _parse_scalar(chunk)))
        finally:
            snap.close()
        _emit({"found": row is not None, "row": row}, as_json)
    except MinihouseError as exc:
        _fail(exc)


@main.command()
@click.option("--table", required=True, help="Document table.")
@click.option("--vector-file", default=None, help="JSON array with the query vector.")
@click.option("--terms", default=None, help="Space-separated query terms.")
@click.option("--fusion", type=click.Choice(["rrf", "score"]), default="rrf", show_default=True)
@click.option("--rrf-k", type=float, default=60.0, show_default=True)
@click.option("--weights", default=None, help="Comma-separated fusion weights (score mode).")
@click.option("--topk", type=int, default=10, show_default=True)
@click.option("--join", "join_table", default=None, help="Label table for post-join refinement.")
@click.option("--join-on", default=None, help="doc_col=label_col (default: doc=doc).")
@click.option("--where", default=None, help="Label predicate, e.g. tag=doc_image.")
@click.option("--vector-column", default="emb", show_default=True)
@click.option("--text-column", default="body", show_default=True)
@click.option("--runtime-filter/--no-runtime-filter", default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def query(ws, table, vector_file, terms, fusion, rrf_k, weights, topk, join_table, join_on,
          where, vector_column, text_column, runtime_filter, as_json):
    """Hybrid lexical+vector retrieval with rank fusion."""
    try:
        if vector_file is None and not terms:
            raise click.UsageError("need --vector-file and/or --terms")
        eng = ws.open_table(table)
        with eng.snapshot() as snap:
            rows = eng.scan(snap)
        items = [(tuple(r[c] for c in eng.pk), r) for r in rows]
        qvec = json.loads(Path(vector_file).read_text()) if vector_file else None
        term_list = terms.split() if terms else None
        w = tuple(float(x) for x in weights.split(",")) if weights else None
        spec = FusionSpec(mode=fusion, weights=w, k=rrf_k, top_k=topk)
        if join_table:
            label_eng = ws.open_table(join_table)
            with label_eng.snapshot() as snap:
                label_rows = label_eng.scan(snap)
            on = tuple((join_on or "doc=doc").split("=", 1))
            predicate = _parse_where(where) if where else None
        else:
            # degenerate label side (all keys match): keeps the pipeline uniform
            from .ivm import order_key

            on = (eng.pk[0], "__k")
            predicate = None
            label_rows = [{"__k": k} for k in sorted({r[eng.pk[0]] for r in rows}, key=order_key)]
        res = execute_hybrid(
            items, label_rows, on, predicate, spec, qvec, term_list,
            vector_column=vector_column, text_column=text_column,
            use_runtime_filter=runtime_filter,
        )
        out = {
            "fused": [{"id": list(rid), "score": score} for rid, score in res.fused.entries],
            "rows": res.rows,
            "scored_rows": res.counters.scored_rows,
            "filter_built": res.counters.filter_built,
        }
        _emit(out, as_json)
    except click.UsageError:
        raise
    except MinihouseError as exc:
        _fail(exc)


@main.command()
@click.option("--table", required=True)
@click.option("--n-star", type=int, default=None, help="Equilibrium delta count [default: 10].")
@click.option("--k", type=float, default=None, help="Controller sensitivity [default: 0.5].")
@click.option("--max-batch", type=int, default=None, help="[default: 8]")
@click.option("--base-period", type=float, default=None, help="[default: 4.0]")
@click.option("--ticks", type=int, default=20, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def compact(ws, table, n_star, k, max_batch, base_period, ticks, as_json):
    """Run the bounded linear compaction controller for a number of ticks."""
    try:
        eng = ws.open_table(table)
        conf = ws.config
        cfg = ControllerConfig(
            n_star=n_star if n_star is not None else conf.get("compaction.n_star", 10),
            k=k if k is not None else conf.get("compaction.k", 0.5),
            max_batch=max_batch if max_batch is not None else conf.get("compaction.max_batch", 8),
            base_period=base_period
            if base_period is not None
            else conf.get("compaction.base_period", 4.0),
        )
        driver = CompactionDriver(eng, cfg)
        log = []
        for _ in range(ticks):
            e = driver.tick()
            log.append(
                {"tick": e.tick, "n_delta": e.n_delta, "alpha": round(e.alpha, 6),
                 "batch": e.batch, "merged": e.merged}
            )
            if not as_json:
                click.echo(
                    f"tick={e.tick} n_delta={e.n_delta} alpha={e.alpha:.3f} "
                    f"batch={e.batch} merged={'yes' if e.merged else 'no'}"
                )
        if as_json:
            _emit({"table": table, "log": log}, True)
    except MinihouseError as exc:
        _fail(exc)


@main.group()
def view():
    """Define, list, and refresh incremental views."""


@view.command("define")
@click.option("--file", "view_file", required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def view_define(ws, view_file, as_json):
    """Validate a view definition file and install it in the workspace."""
    try:
        text = Path(view_file).read_text()
        definition = parse_view_text(text)
        ws.views_dir().mkdir(parents=True, exist_ok=True)
        target = ws.views_dir() / f"{definition.name}.view"
        target.write_text(text)
        _emit({"view": definition.name, "tables": list(definition.tables), "path": str(target)}, as_json)
    except MinihouseError as exc:
        _fail(exc)


@view.command("list")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def view_list(ws, as_json):
    _emit({"views": ws.view_names()}, as_json)


@view.command("refresh")
@click.option("--name", required=True)
@click.option("--interval", default=None, help="'auto' prints the stabilized next interval.")
@click.option("--util", type=float, default=0.0, show_default=True, help="Injected utilization U.")
@click.option("--history", default=None, help="Comma-separated recent refresh durations.")
@click.option("--k", type=float, default=2.0, show_default=True)
@click.option("--dt-min", type=float, default=5.0, show_default=True)
@click.option("--dt-base", type=float, default=60.0, show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--window", type=int, default=5, show_default=True)
@click.option("--source", type=click.Choice(["avg", "last"]), default="avg", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def view_refresh(ws, name, interval, util, history, k, dt_min, dt_base, alpha, window, source, as_json):
    """Refresh a view to the current table versions and print its rows."""
    try:
        path = ws.views_dir() / f"{name}.view"
        if not path.is_file():
            raise click.UsageError(f"no such view {name!r}")
        definition = parse_view_text(path.read_text())
        engines = {t: ws.open_table(t) for t in definition.tables}
        mv = MaterializedView(definition, engines)
        result = mv.refresh()
        out = {
            "view": name,
            "rows": mv.rows(),
            "refresh_seconds": round(result.duration, 6),
            "rows_in": result.rows_in,
            "probe_matches": result.probe_matches,
        }
        if interval == "auto":
            hist = [float(x) for x in history.split(",")] if history else [result.duration]
            cfg = RefreshConfig(k=k, dt_min=dt_min, dt_base=dt_base, alpha=alpha,
                                window=window, source=source)
            trace = refresh_trace(hist, hist[-1], util, cfg)
            out["interval"] = trace
            if not as_json:
                click.echo(
                    f"t_avg=mean({trace['window']})={trace['t_avg']:.6g}  "
                    f"t_src({source})={trace['t_src']:.6g}"
                )
                click.echo(
                    f"dt_max=dt_base*(1+alpha*U)={dt_base:.6g}*(1+{alpha:.6g}*{util:.6g})"
                    f"={trace['dt_max']:.6g}"
                )
                click.echo(
                    f"dt=min(max(k*t_src, dt_min), dt_max)=min(max({trace['raw']:.6g}, "
                    f"{dt_min:.6g}), {trace['dt_max']:.6g})={trace['dt']:.6g}"
                )
        _emit(out, as_json)
    except click.UsageError:
        raise
    except MinihouseError as exc:
        _fail(exc)


@main.command()
@click.option("--file", "snf_file", required=True, help="An .snf file to check.")
@click.option("--verify-data", is_flag=True, help="Also checksum the data region on open.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def fsck(ws, snf_file, verify_data, as_json):
    """Verify the integrity of a columnar file; exit 2 on corruption."""
    try:
        blob = Path(snf_file).read_bytes()
    except OSError as exc:
        raise click.UsageError(str(exc))
    try:
        handle = colfile.open_file(blob, verify_data=verify_data)
    except MinihouseError as exc:
        _emit({"file": snf_file, "open_error": str(exc), "status": "corrupt"}, as_json)
        sys.exit(2)
    report = colfile.verify_integrity(handle)
    status = "ok" if all(v == "ok" for v in report.values()) else "corrupt"
    _emit({"file": snf_file, "regions": report, "status": status}, as_json)
    if status != "ok":
        sys.exit(2)


@main.command("cache-stats")
@click.option("--nodes", type=int, default=None, help="[default: 4]")
@click.option("--block-mb", type=float, default=None, help="[default: 12]")
@click.option("--chunk-mb", type=float, default=None, help="[default: 4]")
@click.option("--region-kb", type=int, default=None, help="[default: 1024]")
@click.option("--segment-kb", type=int, default=None, help="[default: 128]")
@click.option("--workload-kb", type=int, default=2048, help="Demo workload size.")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def cache_stats(ws, nodes, block_mb, chunk_mb, region_kb, segment_kb, workload_kb, seed, as_json):
    """Run a seeded demo workload through the cache plane and print stats()."""
    from .cache import CachePlane

    conf = ws.config
    nodes = nodes if nodes is not None else conf.get("cache.nodes", 4)
    block_mb = block_mb if block_mb is not None else conf.get("cache.block_mb", 12)
    chunk_mb = chunk_mb if chunk_mb is not None else conf.get("cache.chunk_mb", 4)
    region_kb = region_kb if region_kb is not None else conf.get("cache.region_kb", 1024)
    segment_kb = segment_kb if segment_kb is not None else conf.get("cache.segment_kb", 128)
    try:
        plane = CachePlane(
            ws.cache_root(),
            nodes=nodes,
            block_bytes=int(block_mb * (1 << 20)),
            chunk_bytes=int(chunk_mb * (1 << 20)),
            region_bytes=region_kb << 10,
            segment_bytes=segment_kb << 10,
        )
        rnd = random.Random(seed)
        data = bytes(rnd.getrandbits(8) for _ in range(workload_kb << 10))
        plane.write_file("demo.bin", data)
        for _ in range(200):
            off = rnd.randrange(0, len(data))
            ln = rnd.randrange(0, min(len(data) - off, 64 << 10))
            plane.read_range("demo.bin", off, ln)
        _emit(plane.stats(), as_json)
    except MinihouseError as exc:
        _fail(exc)


@main.command()
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--quick", is_flag=True, help="Smaller workloads.")
@click.option("--out", "out_dir", default=None, help="Report directory (CSV + figures).")
@click.option("--report/--no-report", default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def bench(ws, seed, quick, out_dir, report, as_json):
    """Run the acceptance-style workloads and emit a metrics table."""
    metrics, extras = bench_mod.run_bench(seed=seed, quick=quick)
    if as_json:
        click.echo(bench_mod.metrics_json(metrics))
    else:
        _emit(metrics, False)
    if report:
        target = Path(out_dir) if out_dir else ws.root / "bench_out"
        written = bench_mod.write_report(metrics, extras, target)
        if not as_json:
            for p in written:
                click.echo(f"wrote {p}")


@main.command()
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def info(ws, as_json):
    """Where all persistent state lives."""
    tables = {}
    for name in ws.table_names():
        try:
            eng = ws.open_table(name)
            tables[name] = {
                "version": eng.current_version,
                "segments": len(eng.live_segments()),
                "delta_segments": len(eng.live_delta_segments()),
            }
        except MinihouseError as exc:
            tables[name] = {"error": str(exc)}
    _emit(
        {
            "root": str(ws.root.resolve()),
            "tables_dir": str(ws.tables_dir()),
            "views_dir": str(ws.views_dir()),
            "cache_root": str(ws.cache_root()),
            "tables": tables,
            "views": ws.view_names(),
        },
        as_json,
    )


if __name__ == "__main__":
    main()

import json

import pytest
from click.testing import CliRunner

from minihouse.cli import main

SCHEMA = {
    "columns": [
        {"name": "doc", "type": "int", "nullable": False},
        {"name": "chunk", "type": "int", "nullable": False},
        {"name": "body", "type": "str", "nullable": True},
        {"name": "emb", "type": "vec", "nullable": True},
    ],
    "sort_key": ["doc", "chunk"],
    "primary_key": ["doc", "chunk"],
}

LABEL_SCHEMA = {
    "columns": [
        {"name": "ldoc", "type": "int", "nullable": False},
        {"name": "lchunk", "type": "int", "nullable": False},
        {"name": "tag", "type": "str", "nullable": True},
    ],
    "sort_key": ["ldoc", "lchunk"],
    "primary_key": ["ldoc", "lchunk"],
}


@pytest.fixture
def ws(tmp_path):
    runner = CliRunner()
    root = tmp_path / "ws"

    def invoke(*args, **kw):
        return runner.invoke(main, ["--root", str(root), *args], catch_exceptions=False, **kw)

    (tmp_path / "schema.json").write_text(json.dumps(SCHEMA))
    (tmp_path / "labels.json").write_text(json.dumps(LABEL_SCHEMA))
    rows = [
        {"doc": i, "chunk": 0, "body": f"alpha doc {i}", "emb": [1.0 * i, 0.5]} for i in range(20)
    ]
    (tmp_path / "rows.jsonl").write_text("\n".join(json.dumps(r) for r in rows))
    labels = [{"ldoc": i, "lchunk": 0, "tag": "hot" if i % 5 == 0 else "cold"} for i in range(20)]
    (tmp_path / "labels.jsonl").write_text("\n".join(json.dumps(r) for r in labels))
    (tmp_path / "q.json").write_text("[1.0, 0.5]")
    return invoke, tmp_path


class TestIngestLookup:
    def test_round_trip(self, ws):
        invoke, tmp = ws
        r = invoke("ingest", "--table", "docs", "--input", str(tmp / "rows.jsonl"),
                   "--schema", str(tmp / "schema.json"), "--force-flush", "--json")
        assert r.exit_code == 0, r.output
        out = json.loads(r.output)
        assert out["rows"] == 20 and out["flushed_segment"]
        r = invoke("lookup", "--table", "docs", "--doc", "7", "--chunk", "0", "--json")
        assert r.exit_code == 0
        row = json.loads(r.output)["row"]
        assert row["body"] == "alpha doc 7"

    def test_lookup_absent(self, ws):
        invoke, tmp = ws
        invoke("ingest", "--table", "docs", "--input", str(tmp / "rows.jsonl"),
               "--schema", str(tmp / "schema.json"))
        r = invoke("lookup", "--table", "docs", "--doc", "999", "--chunk", "0", "--json")
        assert r.exit_code == 0
        assert json.loads(r.output)["found"] is False

    def test_missing_table_is_user_error(self, ws):
        invoke, _ = ws
        r = invoke("lookup", "--table", "nope", "--doc", "1", "--chunk", "0")
        assert r.exit_code == 1


class TestQuery:
    def test_hybrid_query_with_join(self, ws):
        invoke, tmp = ws
        invoke("ingest", "--table", "docs", "--input", str(tmp / "rows.jsonl"),
               "--schema", str(tmp / "schema.json"), "--force-flush")
        invoke("ingest", "--table", "labels", "--input", str(tmp / "labels.jsonl"),
               "--schema", str(tmp / "labels.json"), "--force-flush")
        r = invoke("query", "--table", "docs", "--vector-file", str(tmp / "q.json"),
                   "--terms", "alpha", "--fusion", "rrf", "--rrf-k", "60", "--topk", "5",
                   "--join", "labels", "--join-on", "doc=ldoc", "--where", "tag=hot", "--json")
        assert r.exit_code == 0, r.output
        out = json.loads(r.output)
        assert out["fused"]
        assert all(row["tag"] == "hot" for row in out["rows"])

    def test_query_without_join(self, ws):
        invoke, tmp = ws
        invoke("ingest", "--table", "docs", "--input", str(tmp / "rows.jsonl"),
               "--schema", str(tmp / "schema.json"))
        r = invoke("query", "--table", "docs", "--terms", "alpha", "--topk", "3", "--json")
        assert r.exit_code == 0, r.output
        assert len(json.loads(r.output)["fused"]) == 3


class TestFsck:
    def test_clean_and_corrupt(self, ws):
        invoke, tmp = ws
        invoke("ingest", "--table", "docs", "--input", str(tmp / "rows.jsonl"),
               "--schema", str(tmp / "schema.json"), "--force-flush")
        seg = next((tmp / "ws" / "tables" / "docs" / "segments").glob("*.snf"))
        r = invoke("fsck", "--file", str(seg), "--json")
        assert r.exit_code == 0
        assert json.loads(r.output)["status"] == "ok"
        blob = bytearray(seg.read_bytes())
        blob[len(blob) // 2] ^= 0x40
        bad = tmp / "bad.snf"
        bad.write_bytes(bytes(blob))
        r = invoke("fsck", "--file", str(bad), "--json")
        assert r.exit_code == 2
        report = json.loads(r.output)
        assert report["status"] == "corrupt"


class TestViews:
    VIEW = """
view doc_counts
source docs
aggregate by body: count(*) as n
"""

    def test_define_and_refresh_with_interval_trace(self, ws):
        invoke, tmp = ws
        invoke("ingest", "--table", "docs", "--input", str(tmp / "rows.jsonl"),
               "--schema", str(tmp / "schema.json"))
        (tmp / "v.view").write_text(self.VIEW)
        r = invoke("view", "define", "--file", str(tmp / "v.view"), "--json")
        assert r.exit_code == 0, r.output
        r = invoke("view", "list", "--json")
        assert json.loads(r.output)["views"] == ["doc_counts"]
        r = invoke("view", "refresh", "--name", "doc_counts", "--interval", "auto",
                   "--util", "0.0", "--history", "10", "--k", "2", "--dt-min", "5",
                   "--dt-base", "60", "--source", "last", "--json")
        assert r.exit_code == 0, r.output
        out = json.loads(r.output)
        assert len(out["rows"]) == 20
        # Eq-by-hand: dt = min(max(2*10, 5), 60*(1+0.5*0)) = 20
        assert out["interval"]["dt"] == 20.0

    def test_refresh_unknown_view(self, ws):
        invoke, _ = ws
        r = invoke("view", "refresh", "--name", "ghost")
        assert r.exit_code == 1


class TestCacheStats:
    def test_stats_table(self, ws):
        invoke, _ = ws
        r = invoke("cache-stats", "--nodes", "2", "--block-mb", "0.046875",
                   "--chunk-mb", "0.015625", "--region-kb", "8", "--segment-kb", "2",
                   "--workload-kb", "64", "--json")
        assert r.exit_code == 0, r.output
        s = json.loads(r.output)
        served = sum(s[t]["bytes_served"] for t in ("buffer", "region", "shared", "backend"))
        assert served == s["bytes_requested"]


class TestInfo:
    def test_info_lists_state_dirs(self, ws):
        invoke, tmp = ws
        invoke("ingest", "--table", "docs", "--input", str(tmp / "rows.jsonl"),
               "--schema", str(tmp / "schema.json"))
        r = invoke("info", "--json")
        out = json.loads(r.output)
        assert "docs" in out["tables"]
        assert out["tables"]["docs"]["version"] == 1

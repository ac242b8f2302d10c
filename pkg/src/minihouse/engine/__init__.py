"""WAL-backed staging, MVCC segments, and the unified table engine."""

from .table import (
    COL_SEQ,
    COL_TOMB,
    COL_VER,
    FlushPolicy,
    Segment,
    Snapshot,
    TableEngine,
    TxnToken,
    schema_from_json,
    schema_to_json,
)
from .wal import WriteAheadLog

__all__ = [
    "COL_SEQ",
    "COL_TOMB",
    "COL_VER",
    "FlushPolicy",
    "Segment",
    "Snapshot",
    "TableEngine",
    "TxnToken",
    "WriteAheadLog",
    "schema_from_json",
    "schema_to_json",
]

"""Columnar `.snf` files: write, open, verify, navigate."""

from .bloom import BloomFilter
from .format import (
    DEFAULT_GROUP_ROWS,
    FOOTER_LEN,
    MAGIC,
    REGION_BLOOM,
    REGION_DATA,
    REGION_FOOTER,
    REGION_LAYOUT,
    REGION_SCHEMA,
    REGION_SORTKEY,
    REGION_STATS,
    TRUE_PREDICATE,
    BloomFilterDesc,
    ColumnPartitionMeta,
    ColumnStats,
    DataBlockRef,
    FileHandle,
    FileLayout,
    Footer,
    IoCounter,
    Predicate,
    RecordGroupMeta,
    locate_key,
    open_file,
    prune,
    read_block,
    read_columns,
    read_group_column,
    verify_integrity,
    write_file,
)
from .schema import ColumnDef, SchemaDescriptor, schema

__all__ = [
    "DEFAULT_GROUP_ROWS",
    "FOOTER_LEN",
    "MAGIC",
    "REGION_BLOOM",
    "REGION_DATA",
    "REGION_FOOTER",
    "REGION_LAYOUT",
    "REGION_SCHEMA",
    "REGION_SORTKEY",
    "REGION_STATS",
    "TRUE_PREDICATE",
    "BloomFilter",
    "BloomFilterDesc",
    "ColumnDef",
    "ColumnPartitionMeta",
    "ColumnStats",
    "DataBlockRef",
    "FileHandle",
    "FileLayout",
    "Footer",
    "IoCounter",
    "Predicate",
    "RecordGroupMeta",
    "SchemaDescriptor",
    "locate_key",
    "open_file",
    "prune",
    "read_block",
    "read_columns",
    "read_group_column",
    "schema",
    "verify_integrity",
    "write_file",
]

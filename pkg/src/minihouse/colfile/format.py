"""Self-describing columnar file format (`.snf`).

One file holds three contiguous regions behind a 4-byte magic preamble:

    [magic "SNF1"][Data Region][Descriptor Region][Footer, 128 bytes]

The Data Region is group-major: for each record group, for each column,
one or more data blocks (the smallest read units). The Descriptor Region
holds five length-prefixed, versioned sections (layout index, sort-key
descriptor, column statistics, bloom filters, schema). The Footer is a
fixed 128-byte trailer carrying region offsets, CRC-32C values for every
region, and its own CRC — a single trailing read reconstructs the whole
layout without any external catalog. See docs/format.md for byte layouts.
"""

import bisect
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .. import encodings
from ..crc import crc32c
from ..encodings import codecs
from ..encodings.bits import pack_bools, unpack_bools
from ..encodings.codecs import _pack_value, _unpack_value
from ..errors import (
    BadMagic,
    BlockChecksumMismatch,
    CodecMismatch,
    CorruptDescriptor,
    FooterChecksumMismatch,
    MalformedPayload,
    NoSortKey,
    OutOfRange,
    SchemaMismatch,
    SortViolation,
    UnknownColumn,
    UnsupportedType,
    UnsupportedVersion,
)
from .bloom import BloomFilter
from .schema import SchemaDescriptor, parse_schema, serialize_schema

MAGIC = b"SNF1"
FORMAT_VERSION = 1
FOOTER_LEN = 128
DATA_START = 4
DEFAULT_GROUP_ROWS = 8192

_FOOTER_FMT = "<11Q6II4sI"  # 124 bytes; a trailing u32 CRC completes the 128
_SECTION_HEAD = "<4sHI"
_SECTION_HEAD_LEN = 10

_TAG_LAYOUT = b"LIDX"
_TAG_SORTKEY = b"SKEY"
_TAG_STATS = b"STAT"
_TAG_BLOOM = b"BLOM"
_TAG_SCHEMA = b"SCHM"

REGION_DATA = "data"
REGION_LAYOUT = "layout_index"
REGION_SORTKEY = "sort_key"
REGION_STATS = "stats"
REGION_BLOOM = "bloom"
REGION_SCHEMA = "schema"
REGION_FOOTER = "footer"

DESCRIPTOR_REGIONS = (REGION_LAYOUT, REGION_SORTKEY, REGION_STATS, REGION_BLOOM, REGION_SCHEMA)


@dataclass
class DataBlockRef:
    file_offset: int
    byte_length: int
    codec_id: int
    row_count: int


@dataclass
class ColumnStats:
    min: object
    max: object
    null_count: int


@dataclass
class BloomFilterDesc:
    n_bits: int
    n_hashes: int
    payload_offset: int  # relative to the bloom section payload
    filter: BloomFilter


@dataclass
class ColumnPartitionMeta:
    column_id: int
    blocks: List[DataBlockRef]
    stats: Optional[ColumnStats]
    bloom: Optional[BloomFilterDesc] = None


@dataclass
class RecordGroupMeta:
    index: int
    row_start: int
    row_count: int
    partitions: List[ColumnPartitionMeta]
    sort_key_min: Optional[tuple] = None
    sort_key_max: Optional[tuple] = None
    # per block: (first_key, last_key); boundaries shared by every column
    block_keys: Optional[List[Tuple[tuple, tuple]]] = None


@dataclass
class Footer:
    data_len: int
    regions: Dict[str, Tuple[int, int]]  # name -> (offset, length)
    crcs: Dict[str, int]  # region name -> crc (data + descriptors)
    version: int = FORMAT_VERSION


@dataclass
class FileLayout:
    record_groups: List[RecordGroupMeta]
    schema: SchemaDescriptor
    footer: Footer


@dataclass
class IoCounter:
    block_reads: int = 0
    bytes_read: int = 0

    def reset(self):
        self.block_reads = 0
        self.bytes_read = 0


@dataclass(frozen=True)
class Predicate:
    """Single-column comparison; column None is the tautology."""

    column: Optional[str]
    op: str = "true"  # ==, !=, <, <=, >, >=, true
    value: object = None

    def matches(self, v):
        if self.column is None or self.op == "true":
            return True
        if v is None:
            return False
        if self.op == "==":
            return v == self.value
        if self.op == "!=":
            return v != self.value
        if self.op == "<":
            return v < self.value
        if self.op == "<=":
            return v <= self.value
        if self.op == ">":
            return v > self.value
        if self.op == ">=":
            return v >= self.value
        raise UnsupportedType(f"unknown predicate op {self.op!r}")


TRUE_PREDICATE = Predicate(None)


class FileHandle:
    """An opened `.snf` file: validated footer, memory-resident descriptors,
    addressable data blocks. Immutable after open; safe to share across
    concurrent readers."""

    def __init__(self, raw, footer, schema, groups, region_ok, verify_data=False):
        self.raw = raw
        self.footer = footer
        self.schema = schema
        self.groups = groups
        self.region_ok = region_ok
        self.io = IoCounter()
        self.verify_mode = verify_data
        self._data_ok = None
        if verify_data:
            self._check_data_region()

    # --- internals ---

    def _check_data_region(self):
        if self._data_ok is None:
            off, length = DATA_START, self.footer.data_len
            self._data_ok = crc32c(self.raw[off : off + length]) == self.footer.crcs[REGION_DATA]
        return self._data_ok

    def _need(self, attr, region):
        if not self.region_ok.get(region, False):
            raise CorruptDescriptor(f"{region} descriptor failed its checksum")
        val = getattr(self, attr)
        if val is None:
            raise CorruptDescriptor(f"{region} descriptor unavailable")
        return val

    @property
    def total_rows(self):
        groups = self._need("groups", REGION_LAYOUT)
        return sum(g.row_count for g in groups)

    def column_type(self, name):
        sd = self._need("schema", REGION_SCHEMA)
        col = sd.find(name)
        if col is None:
            raise UnknownColumn(name)
        return col.vtype


# --- typed key/value helpers ---


def _pack_key(key_types, key):
    return b"".join(_pack_value(t, v) for t, v in zip(key_types, key))


def _unpack_key(key_types, buf, off):
    vals = []
    for t in key_types:
        v, off = _unpack_value(t, buf, off)
        vals.append(v)
    return tuple(vals), off


def _coerce_column(col, values):
    """Validate a column's python values against its definition; coerce
    ints to floats in float columns and sequence vectors to lists."""
    out = []
    for v in values:
        if v is None:
            if not col.nullable:
                raise SchemaMismatch(f"null in non-nullable column {col.name!r}")
            out.append(None)
            continue
        if col.vtype == codecs.TYPE_INT:
            if isinstance(v, bool) or not isinstance(v, int):
                raise SchemaMismatch(f"column {col.name!r} expects int, got {type(v).__name__}")
            out.append(v)
        elif col.vtype == codecs.TYPE_FLOAT:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaMismatch(f"column {col.name!r} expects float, got {type(v).__name__}")
            out.append(float(v))
        elif col.vtype == codecs.TYPE_STR:
            if not isinstance(v, str):
                raise SchemaMismatch(f"column {col.name!r} expects str, got {type(v).__name__}")
            out.append(v)
        else:  # vector
            try:
                out.append([float(x) for x in v])
            except (TypeError, ValueError) as exc:
                raise SchemaMismatch(
                    f"column {col.name!r} expects a numeric sequence, got {type(v).__name__}"
                ) from exc
    return out


# --- data block wire form ---


def _encode_data_block(col, values, codec_override):
    """Serialize one column block; returns (bytes, codec_id)."""
    n = len(values)
    if col.vtype == codecs.TYPE_VECTOR:
        vc = encodings.encode_vectors_lp(values)
        return b"\x01" + encodings.vector_column_to_bytes(vc), codecs.LP_VECTOR
    nulls = [v is None for v in values]
    null_count = sum(nulls)
    present = [v for v in values if v is not None]
    if codec_override is not None:
        codec_id = codec_override
    elif present:
        codec_id, _ = encodings.choose_encoding(col.vtype, encodings.take_sample(present))
    else:
        codec_id = codecs.PLAIN
    block = encodings.encode_auto(present, col.vtype, codec_id)
    head = struct.pack("<BIB", 0, n, 1 if null_count else 0)
    bitmap = pack_bools([not x for x in nulls]) if null_count else b""
    return head + bitmap + encodings.serialize_block(block), block.codec_id


def _decode_data_block(buf, vtype, expected_rows):
    if not buf:
        raise MalformedPayload("empty data block")
    kind = buf[0]
    if kind == 1:
        if vtype != codecs.TYPE_VECTOR:
            raise CodecMismatch(f"vector block read as {vtype}")
        vc = encodings.vector_column_from_bytes(bytes(buf[1:]))
        if vc.row_count != expected_rows:
            raise MalformedPayload("vector block row count mismatch")
        return encodings.decode_vectors_lp(vc)
    if kind != 0:
        raise MalformedPayload(f"unknown block kind {kind}")
    if vtype == codecs.TYPE_VECTOR:
        raise CodecMismatch("scalar block read as vector")
    if len(buf) < 6:
        raise MalformedPayload("scalar block header truncated")
    _, n, has_nulls = struct.unpack_from("<BIB", buf, 0)
    if n != expected_rows:
        raise MalformedPayload("scalar block row count mismatch")
    off = 6
    if has_nulls:
        bitmap_len = (n + 7) // 8
        validity = unpack_bools(buf[off : off + bitmap_len], n)
        off += bitmap_len
    else:
        validity = None
    block = encodings.parse_block(bytes(buf[off:]))
    if block.vtype != vtype:
        raise CodecMismatch(f"block holds {block.vtype}, requested {vtype}")
    present = encodings.decode_block(block)
    if validity is None:
        if len(present) != n:
            raise MalformedPayload("block value count mismatch")
        return present
    if len(present) != sum(validity):
        raise MalformedPayload("block value count disagrees with validity bitmap")
    out = []
    it = iter(present)
    for ok in validity:
        out.append(next(it) if ok else None)
    return out


# --- write path ---


def write_file(
    columns,
    schema,
    group_target_rows=DEFAULT_GROUP_ROWS,
    codec_overrides=None,
    block_target_rows=None,
    bloom_bits_per_key=10,
    bloom_hashes=7,
    bloom_columns=None,
):
    """Serialize a table into `.snf` bytes; returns (bytes, FileLayout).

    Rows must already be ordered by the declared sort key (SortViolation
    otherwise). Bloom filters are built per column partition for int and
    str columns (restrict with `bloom_columns`).
    """
    if group_target_rows < 1:
        raise SchemaMismatch("group_target_rows must be >= 1")
    if set(columns) != set(schema.names):
        raise SchemaMismatch(
            f"columns {sorted(columns)} do not match schema {sorted(schema.names)}"
        )
    lengths = {len(v) for v in columns.values()} or {0}
    if len(lengths) > 1:
        raise SchemaMismatch(f"column lengths differ: {sorted(lengths)}")
    n_rows = lengths.pop() if columns else 0
    codec_overrides = codec_overrides or {}

    data = {c.name: _coerce_column(c, columns[c.name]) for c in schema.columns}

    key_types = tuple(schema.find(k).vtype for k in schema.sort_key)
    keys = None
    if schema.sort_key:
        keys = list(zip(*(data[k] for k in schema.sort_key))) if n_rows else []
        for i in range(1, len(keys)):
            if keys[i] < keys[i - 1]:
                raise SortViolation(f"rows not ordered by sort key at row {i}")

    if block_target_rows is None:
        block_target_rows = group_target_rows
    block_target_rows = max(1, block_target_rows)

    if bloom_columns is None:
        bloom_columns = {
            c.name for c in schema.columns if c.vtype in (codecs.TYPE_INT, codecs.TYPE_STR)
        }

    groups: List[RecordGroupMeta] = []
    data_parts: List[bytes] = []
    offset = DATA_START

    for gi, gstart in enumerate(range(0, n_rows, group_target_rows)):
        gcount = min(group_target_rows, n_rows - gstart)
        block_bounds = [
            (bstart, min(bstart + block_target_rows, gcount))
            for bstart in range(0, gcount, block_target_rows)
        ]
        partitions = []
        for ci, col in enumerate(schema.columns):
            gvalues = data[col.name][gstart : gstart + gcount]
            refs = []
            override = codec_overrides.get(col.name, col.codec)
            for bstart, bend in block_bounds:
                bvals = gvalues[bstart:bend]
                blob, codec_id = _encode_data_block(col, bvals, override)
                refs.append(DataBlockRef(offset, len(blob), codec_id, len(bvals)))
                data_parts.append(blob)
                offset += len(blob)
            null_count = sum(1 for v in gvalues if v is None)
            if col.vtype == codecs.TYPE_VECTOR or null_count == gcount:
                stats = ColumnStats(None, None, null_count)
            else:
                present = [v for v in gvalues if v is not None]
                stats = ColumnStats(min(present), max(present), null_count)
            bloom = None
            if col.name in bloom_columns and col.vtype in (codecs.TYPE_INT, codecs.TYPE_STR):
                present = [v for v in gvalues if v is not None]
                bf = BloomFilter.build(present, bloom_bits_per_key, bloom_hashes)
                bloom = BloomFilterDesc(bf.n_bits, bf.n_hashes, 0, bf)
            partitions.append(ColumnPartitionMeta(ci, refs, stats, bloom))
        meta = RecordGroupMeta(gi, gstart, gcount, partitions)
        if keys is not None:
            gkeys = keys[gstart : gstart + gcount]
            meta.sort_key_min = gkeys[0]
            meta.sort_key_max = gkeys[-1]
            meta.block_keys = [(gkeys[b0], gkeys[b1 - 1]) for b0, b1 in block_bounds]
        groups.append(meta)

    data_region = b"".join(data_parts)
    layout_payload = _serialize_layout(groups, len(schema.columns))
    sortkey_payload = _serialize_sortkey(groups, key_types) if schema.sort_key else b""
    stats_payload = _serialize_stats(groups, schema)
    bloom_payload = _serialize_bloom(groups)
    schema_payload = serialize_schema(schema)

    sections = [
        (_TAG_LAYOUT, REGION_LAYOUT, layout_payload),
        (_TAG_SORTKEY, REGION_SORTKEY, sortkey_payload),
        (_TAG_STATS, REGION_STATS, stats_payload),
        (_TAG_BLOOM, REGION_BLOOM, bloom_payload),
        (_TAG_SCHEMA, REGION_SCHEMA, schema_payload),
    ]

    regions = {}
    crcs = {REGION_DATA: crc32c(data_region)}
    blob_parts = [MAGIC, data_region]
    cursor = DATA_START + len(data_region)
    for tag, name, payload in sections:
        raw = struct.pack(_SECTION_HEAD, tag, 1, len(payload)) + payload
        regions[name] = (cursor, len(raw))
        crcs[name] = crc32c(raw)
        blob_parts.append(raw)
        cursor += len(raw)

    footer = Footer(len(data_region), regions, crcs)
    blob_parts.append(_serialize_footer(footer))
    return b"".join(blob_parts), FileLayout(groups, schema, footer)


def _serialize_footer(f):
    r = f.regions
    body = struct.pack(
        _FOOTER_FMT,
        f.data_len,
        r[REGION_LAYOUT][0],
        r[REGION_LAYOUT][1],
        r[REGION_SORTKEY][0],
        r[REGION_SORTKEY][1],
        r[REGION_STATS][0],
        r[REGION_STATS][1],
        r[REGION_BLOOM][0],
        r[REGION_BLOOM][1],
        r[REGION_SCHEMA][0],
        r[REGION_SCHEMA][1],
        f.crcs[REGION_DATA],
        f.crcs[REGION_LAYOUT],
        f.crcs[REGION_SORTKEY],
        f.crcs[REGION_STATS],
        f.crcs[REGION_BLOOM],
        f.crcs[REGION_SCHEMA],
        f.version,
        MAGIC,
        0,
    )
    return body + struct.pack("<I", crc32c(body))


def _parse_footer(buf):
    body, (crc,) = buf[:-4], struct.unpack_from("<I", buf, FOOTER_LEN - 4)
    if crc32c(body) != crc:
        raise FooterChecksumMismatch("footer checksum mismatch")
    fields = struct.unpack(_FOOTER_FMT, body)
    (
        data_len,
        lo,
        ll,
        so,
        sl,
        to,
        tl,
        bo,
        bl,
        co,
        cl,
        crc_data,
        crc_layout,
        crc_sort,
        crc_stats,
        crc_bloom,
        crc_schema,
        version,
        magic2,
        _reserved,
    ) = fields
    if magic2 != MAGIC:
        raise BadMagic("footer magic mismatch")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version}")
    regions = {
        REGION_LAYOUT: (lo, ll),
        REGION_SORTKEY: (so, sl),
        REGION_STATS: (to, tl),
        REGION_BLOOM: (bo, bl),
        REGION_SCHEMA: (co, cl),
    }
    crcs = {
        REGION_DATA: crc_data,
        REGION_LAYOUT: crc_layout,
        REGION_SORTKEY: crc_sort,
        REGION_STATS: crc_stats,
        REGION_BLOOM: crc_bloom,
        REGION_SCHEMA: crc_schema,
    }
    return Footer(data_len, regions, crcs, version)


# --- descriptor section payloads ---


def _serialize_layout(groups, n_cols):
    out = [struct.pack("<IH", len(groups), n_cols)]
    for g in groups:
        out.append(struct.pack("<QI", g.row_start, g.row_count))
        for part in g.partitions:
            out.append(struct.pack("<H", len(part.blocks)))
            for ref in part.blocks:
                out.append(
                    struct.pack("<QIBI", ref.file_offset, ref.byte_length, ref.codec_id, ref.row_count)
                )
    return b"".join(out)


def _parse_layout(buf):
    n_groups, n_cols = struct.unpack_from("<IH", buf, 0)
    off = 6
    groups = []
    for gi in range(n_groups):
        row_start, row_count = struct.unpack_from("<QI", buf, off)
        off += 12
        partitions = []
        for ci in range(n_cols):
            (n_blocks,) = struct.unpack_from("<H", buf, off)
            off += 2
            refs = []
            for _ in range(n_blocks):
                fo, bl, codec, rows = struct.unpack_from("<QIBI", buf, off)
                off += 17
                refs.append(DataBlockRef(fo, bl, codec, rows))
            partitions.append(ColumnPartitionMeta(ci, refs, None))
        groups.append(RecordGroupMeta(gi, row_start, row_count, partitions))
    return groups


def _serialize_sortkey(groups, key_types):
    out = [struct.pack("<BI", len(key_types), len(groups))]
    for g in groups:
        out.append(_pack_key(key_types, g.sort_key_min))
        out.append(_pack_key(key_types, g.sort_key_max))
        out.append(struct.pack("<H", len(g.block_keys)))
        for first, last in g.block_keys:
            out.append(_pack_key(key_types, first))
            out.append(_pack_key(key_types, last))
    return b"".join(out)


def _parse_sortkey(buf, key_types):
    n_key_cols, n_groups = struct.unpack_from("<BI", buf, 0)
    if n_key_cols != len(key_types):
        raise MalformedPayload("sort-key column count disagrees with schema")
    off = 5
    entries = []
    for _ in range(n_groups):
        kmin, off = _unpack_key(key_types, buf, off)
        kmax, off = _unpack_key(key_types, buf, off)
        (n_blocks,) = struct.unpack_from("<H", buf, off)
        off += 2
        blocks = []
        for _ in range(n_blocks):
            first, off = _unpack_key(key_types, buf, off)
            last, off = _unpack_key(key_types, buf, off)
            blocks.append((first, last))
        entries.append((kmin, kmax, blocks))
    return entries


def _serialize_stats(groups, schema):
    out = [struct.pack("<IH", len(groups), len(schema.columns))]
    for g in groups:
        for col, part in zip(schema.columns, g.partitions):
            st = part.stats
            has = st.min is not None
            out.append(struct.pack("<BI", int(has), st.null_count))
            if has:
                out.append(_pack_value(col.vtype, st.min))
                out.append(_pack_value(col.vtype, st.max))
    return b"".join(out)


def _parse_stats(buf, schema):
    n_groups, n_cols = struct.unpack_from("<IH", buf, 0)
    if n_cols != len(schema.columns):
        raise MalformedPayload("stats column count disagrees with schema")
    off = 6
    stats = []
    for _ in range(n_groups):
        row = []
        for col in schema.columns:
            has, null_count = struct.unpack_from("<BI", buf, off)
            off += 5
            if has:
                mn, off = _unpack_value(col.vtype, buf, off)
                mx, off = _unpack_value(col.vtype, buf, off)
                row.append(ColumnStats(mn, mx, null_count))
            else:
                row.append(ColumnStats(None, None, null_count))
        stats.append(row)
    return stats


def _serialize_bloom(groups):
    entries = []
    for g in groups:
        for part in g.partitions:
            if part.bloom is not None:
                entries.append((g.index, part.column_id, part.bloom))
    out = [struct.pack("<I", len(entries))]
    payload_offset = 4
    for gi, ci, desc in entries:
        bits = bytes(desc.filter.bits)
        out.append(struct.pack("<IHIBI", gi, ci, desc.n_bits, desc.n_hashes, len(bits)))
        desc.payload_offset = payload_offset + 15
        out.append(bits)
        payload_offset += 15 + len(bits)
    return b"".join(out)


def _parse_bloom(buf):
    (n_entries,) = struct.unpack_from("<I", buf, 0)
    off = 4
    entries = []
    for _ in range(n_entries):
        gi, ci, n_bits, n_hashes, blen = struct.unpack_from("<IHIBI", buf, off)
        off += 15
        bits = bytearray(buf[off : off + blen])
        if len(bits) != blen:
            raise MalformedPayload("bloom payload truncated")
        entries.append((gi, ci, BloomFilterDesc(n_bits, n_hashes, off - blen, BloomFilter(n_bits, n_hashes, bits))))
        off += blen
    return entries


# --- open path ---


def open_file(data, verify_data=False):
    """Open `.snf` bytes: one trailing fixed-size read yields the footer,
    after which every descriptor is loaded and memory-resident."""
    if len(data) < len(MAGIC) or bytes(data[:4]) != MAGIC:
        raise BadMagic("not an .snf file")
    if len(data) < DATA_START + FOOTER_LEN:
        raise FooterChecksumMismatch("file too short for a footer")
    footer = _parse_footer(bytes(data[-FOOTER_LEN:]))

    # region table sanity: contiguous, inside the file
    cursor = DATA_START + footer.data_len
    for name in DESCRIPTOR_REGIONS:
        off, length = footer.regions[name]
        if off != cursor:
            raise MalformedPayload(f"region {name} not contiguous")
        cursor += length
    if cursor != len(data) - FOOTER_LEN:
        raise MalformedPayload("region table does not cover the file")

    region_ok = {}
    raw_sections = {}
    for name in DESCRIPTOR_REGIONS:
        off, length = footer.regions[name]
        raw = bytes(data[off : off + length])
        ok = crc32c(raw) == footer.crcs[name]
        region_ok[name] = ok
        raw_sections[name] = raw

    def payload(name, tag):
        raw = raw_sections[name]
        if len(raw) < _SECTION_HEAD_LEN:
            raise MalformedPayload(f"section {name} truncated")
        got_tag, _ver, plen = struct.unpack_from(_SECTION_HEAD, raw, 0)
        if got_tag != tag:
            raise MalformedPayload(f"section {name} has tag {got_tag!r}")
        if _SECTION_HEAD_LEN + plen > len(raw):
            raise MalformedPayload(f"section {name} payload truncated")
        return raw[_SECTION_HEAD_LEN : _SECTION_HEAD_LEN + plen]

    schema = parse_schema(payload(REGION_SCHEMA, _TAG_SCHEMA)) if region_ok[REGION_SCHEMA] else None
    groups = _parse_layout(payload(REGION_LAYOUT, _TAG_LAYOUT)) if region_ok[REGION_LAYOUT] else None

    if groups is not None and region_ok[REGION_STATS] and schema is not None:
        stats = _parse_stats(payload(REGION_STATS, _TAG_STATS), schema)
        for g, row in zip(groups, stats):
            for part, st in zip(g.partitions, row):
                part.stats = st

    if groups is not None and region_ok[REGION_BLOOM]:
        for gi, ci, desc in _parse_bloom(payload(REGION_BLOOM, _TAG_BLOOM)):
            if gi < len(groups) and ci < len(groups[gi].partitions):
                groups[gi].partitions[ci].bloom = desc

    if (
        groups is not None
        and schema is not None
        and schema.sort_key
        and region_ok[REGION_SORTKEY]
    ):
        key_types = tuple(schema.find(k).vtype for k in schema.sort_key)
        entries = _parse_sortkey(payload(REGION_SORTKEY, _TAG_SORTKEY), key_types)
        if len(entries) != len(groups):
            raise MalformedPayload("sort-key group count disagrees with layout")
        for g, (kmin, kmax, blocks) in zip(groups, entries):
            g.sort_key_min = kmin
            g.sort_key_max = kmax
            g.block_keys = blocks

    if groups is not None:
        _validate_layout(groups, footer)

    return FileHandle(bytes(data), footer, schema, groups, region_ok, verify_data)


def _validate_layout(groups, footer):
    expect_start = 0
    data_end = DATA_START + footer.data_len
    for g in groups:
        if g.row_start != expect_start:
            raise MalformedPayload("record groups are not ordered, disjoint row ranges")
        expect_start += g.row_count
        for part in g.partitions:
            if sum(r.row_count for r in part.blocks) != g.row_count:
                raise MalformedPayload("block row counts do not sum to group rows")
            for ref in part.blocks:
                if ref.row_count > 0 and ref.byte_length <= 0:
                    raise MalformedPayload("empty block with rows")
                if ref.file_offset < DATA_START or ref.file_offset + ref.byte_length > data_end:
                    raise MalformedPayload("block outside the data region")


# --- read operations ---


def read_block(handle, ref, vtype):
    """Decode one data block; the smallest unit of I/O (counted)."""
    data_end = DATA_START + handle.footer.data_len
    if ref.file_offset < DATA_START or ref.file_offset + ref.byte_length > data_end:
        raise OutOfRange(
            f"block [{ref.file_offset}, {ref.file_offset + ref.byte_length}) outside data region"
        )
    if handle.verify_mode and not handle._check_data_region():
        raise BlockChecksumMismatch("data region checksum mismatch")
    handle.io.block_reads += 1
    handle.io.bytes_read += ref.byte_length
    buf = handle.raw[ref.file_offset : ref.file_offset + ref.byte_length]
    values = _decode_data_block(buf, vtype, ref.row_count)
    return values


def read_group_column(handle, group, name):
    """All values of one column within one record group."""
    vtype = handle.column_type(name)
    ci = handle.schema.column_index(name)
    out = []
    for ref in group.partitions[ci].blocks:
        out.extend(read_block(handle, ref, vtype))
    return out


def read_columns(handle, names=None, group_ids=None):
    """Decode whole columns (optionally restricted to some groups)."""
    sd = handle._need("schema", REGION_SCHEMA)
    groups = handle._need("groups", REGION_LAYOUT)
    if names is None:
        names = sd.names
    if group_ids is None:
        group_ids = range(len(groups))
    out = {n: [] for n in names}
    for gi in group_ids:
        g = groups[gi]
        for n in names:
            out[n].extend(read_group_column(handle, g, n))
    return out


def locate_key(handle, key, columns=None):
    """Resolve a composite sort-key value to per-group block refs.

    Returns a list of (group_id, {column: [DataBlockRef...]}) covering every
    block that may hold the key; empty list when the key cannot be present.
    """
    sd = handle._need("schema", REGION_SCHEMA)
    if not sd.sort_key:
        raise NoSortKey("file has no sort-key declaration")
    groups = handle._need("groups", REGION_LAYOUT)
    if groups and groups[0].sort_key_min is None:
        raise CorruptDescriptor("sort_key descriptor unavailable")
    if columns is None:
        columns = sd.names
    col_ids = {n: sd.column_index(n) for n in columns}
    key = tuple(key)

    mins = [g.sort_key_min for g in groups]
    maxes = [g.sort_key_max for g in groups]
    lo = bisect.bisect_left(maxes, key)  # first group whose max >= key
    results = []
    for gi in range(lo, len(groups)):
        if mins[gi] > key:
            break
        g = groups[gi]
        firsts = [bk[0] for bk in g.block_keys]
        lasts = [bk[1] for bk in g.block_keys]
        b_lo = bisect.bisect_left(lasts, key)
        refs_per_col = {n: [] for n in columns}
        found = False
        for bi in range(b_lo, len(firsts)):
            if firsts[bi] > key:
                break
            found = True
            for n in columns:
                refs_per_col[n].append(g.partitions[col_ids[n]].blocks[bi])
        if found:
            results.append((gi, refs_per_col))
    return results


def prune(handle, predicate):
    """Group ids that may contain rows matching the predicate.

    Never prunes a group containing a matching row; equality predicates
    additionally consult the per-partition bloom filter.
    """
    sd = handle._need("schema", REGION_SCHEMA)
    groups = handle._need("groups", REGION_LAYOUT)
    if predicate.column is None or predicate.op == "true":
        return [g.index for g in groups]
    col = sd.find(predicate.column)
    if col is None:
        raise UnknownColumn(predicate.column)
    if col.vtype == codecs.TYPE_VECTOR:
        raise UnsupportedType("cannot prune on a vector column")
    ci = sd.column_index(predicate.column)
    survivors = []
    for g in groups:
        part = g.partitions[ci]
        st = part.stats
        if st is None:
            survivors.append(g.index)  # stats unavailable: keep (sound)
            continue
        if st.min is None:  # no non-null values in this group
            continue
        op, v = predicate.op, predicate.value
        keep = True
        if op == "==":
            keep = st.min <= v <= st.max
            if keep and part.bloom is not None:
                try:
                    keep = part.bloom.filter.might_contain(v)
                except TypeError:
                    keep = True
        elif op == "!=":
            keep = not (st.min == st.max == v)
        elif op == "<":
            keep = st.min < v
        elif op == "<=":
            keep = st.min <= v
        elif op == ">":
            keep = st.max > v
        elif op == ">=":
            keep = st.max >= v
        else:
            raise UnsupportedType(f"unknown predicate op {op!r}")
        if keep:
            survivors.append(g.index)
    return survivors


def verify_integrity(handle):
    """Recompute every region checksum; corruption is reported, not thrown."""
    report = {}
    raw = handle.raw
    off, length = DATA_START, handle.footer.data_len
    report[REGION_DATA] = (
        "ok" if crc32c(raw[off : off + length]) == handle.footer.crcs[REGION_DATA] else "corrupt"
    )
    for name in DESCRIPTOR_REGIONS:
        off, length = handle.footer.regions[name]
        ok = crc32c(raw[off : off + length]) == handle.footer.crcs[name]
        report[name] = "ok" if ok else "corrupt"
    body = raw[-FOOTER_LEN:]
    (crc,) = struct.unpack_from("<I", body, FOOTER_LEN - 4)
    report[REGION_FOOTER] = "ok" if crc32c(body[:-4]) == crc else "corrupt"
    return report

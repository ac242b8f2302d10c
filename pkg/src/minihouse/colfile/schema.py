"""Logical schema for columnar files: column types, sort key, primary key."""

import struct
from dataclasses import dataclass
from typing import Optional, Tuple

from ..encodings import codecs
from ..errors import MalformedPayload, SchemaMismatch

COLUMN_TYPES = (codecs.TYPE_INT, codecs.TYPE_FLOAT, codecs.TYPE_STR, codecs.TYPE_VECTOR)

_TYPE_CODES = {t: i for i, t in enumerate(COLUMN_TYPES)}
_TYPE_FROM_CODE = {i: t for t, i in _TYPE_CODES.items()}


@dataclass(frozen=True)
class ColumnDef:
    name: str
    vtype: str
    nullable: bool = True
    codec: Optional[int] = None  # fixed codec override; None = sample and choose


@dataclass(frozen=True)
class SchemaDescriptor:
    columns: Tuple[ColumnDef, ...]
    sort_key: Tuple[str, ...] = ()
    primary_key: Tuple[str, ...] = ()

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaMismatch("duplicate column names")
        for c in self.columns:
            if c.vtype not in COLUMN_TYPES:
                raise SchemaMismatch(f"unknown column type {c.vtype!r}")
        for group, label in ((self.sort_key, "sort key"), (self.primary_key, "primary key")):
            for name in group:
                col = self.find(name)
                if col is None:
                    raise SchemaMismatch(f"{label} column {name!r} not in schema")
                if col.vtype == codecs.TYPE_VECTOR:
                    raise SchemaMismatch(f"{label} column {name!r} cannot be a vector")
                if col.nullable:
                    raise SchemaMismatch(f"{label} column {name!r} must be non-nullable")

    def find(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        return None

    def column_index(self, name):
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaMismatch(f"no such column {name!r}")

    @property
    def names(self):
        return tuple(c.name for c in self.columns)


def schema(cols, sort_key=(), primary_key=()):
    """Shorthand constructor: cols as (name, vtype) or (name, vtype, nullable)."""
    defs = []
    for spec in cols:
        if isinstance(spec, ColumnDef):
            defs.append(spec)
        else:
            name, vtype = spec[0], spec[1]
            nullable = spec[2] if len(spec) > 2 else True
            defs.append(ColumnDef(name, vtype, nullable))
    return SchemaDescriptor(tuple(defs), tuple(sort_key), tuple(primary_key))


def serialize_schema(sd):
    out = [struct.pack("<H", len(sd.columns))]
    for c in sd.columns:
        nb = c.name.encode("utf-8")
        out.append(struct.pack("<H", len(nb)))
        out.append(nb)
        codec = 0xFF if c.codec is None else c.codec
        out.append(struct.pack("<BBB", _TYPE_CODES[c.vtype], int(c.nullable), codec))
    for key in (sd.sort_key, sd.primary_key):
        out.append(struct.pack("<B", len(key)))
        for name in key:
            out.append(struct.pack("<H", sd.column_index(name)))
    return b"".join(out)


def parse_schema(buf):
    try:
        (n_cols,) = struct.unpack_from("<H", buf, 0)
        off = 2
        cols = []
        for _ in range(n_cols):
            (ln,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = buf[off : off + ln].decode("utf-8")
            off += ln
            tcode, nullable, codec = struct.unpack_from("<BBB", buf, off)
            off += 3
            vtype = _TYPE_FROM_CODE.get(tcode)
            if vtype is None:
                raise MalformedPayload(f"unknown column type code {tcode}")
            cols.append(ColumnDef(name, vtype, bool(nullable), None if codec == 0xFF else codec))
        keys = []
        for _ in range(2):
            (k,) = struct.unpack_from("<B", buf, off)
            off += 1
            idxs = struct.unpack_from(f"<{k}H", buf, off) if k else ()
            off += 2 * k
            keys.append(tuple(cols[i].name for i in idxs))
    except struct.error as exc:
        raise MalformedPayload("truncated schema descriptor") from exc
    return SchemaDescriptor(tuple(cols), keys[0], keys[1])

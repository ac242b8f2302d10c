"""Block codecs: encode/decode plus a self-framing wire form.

Codec ids and header layouts are part of the `.snf` file format (see
docs/format.md). Every codec is bit-exact invertible on its accepted
domain; values outside the domain raise ValueOutOfCodecRange so the
caller can fall back to PLAIN.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import CodecMismatch, MalformedPayload, UnsupportedType, ValueOutOfCodecRange
from . import fsst
from .bits import pack_uints, unpack_uints

PLAIN = 0
FOR_BITPACK = 1
RLE = 2
DICT = 3
FSST_LITE = 4
ALP = 5
LP_VECTOR = 6

CODEC_NAMES = {
    PLAIN: "plain",
    FOR_BITPACK: "for_bitpack",
    RLE: "rle",
    DICT: "dict",
    FSST_LITE: "fsst_lite",
    ALP: "alp",
    LP_VECTOR: "lp_vector",
}

TYPE_INT = "int"
TYPE_FLOAT = "float"
TYPE_STR = "str"
TYPE_VECTOR = "vec"

_TYPE_CODES = {TYPE_INT: 0, TYPE_FLOAT: 1, TYPE_STR: 2, TYPE_VECTOR: 3}
_TYPE_FROM_CODE = {v: k for k, v in _TYPE_CODES.items()}

_I64_MIN = -(1 << 63)
_I64_MAX = (1 << 63) - 1
_MAX_DECIMAL_EXPONENT = 18


@dataclass
class EncodedBlock:
    codec_id: int
    vtype: str
    row_count: int
    params: dict = field(default_factory=dict)
    payload: bytes = b""


def _require_ints(values):
    for v in values:
        if not isinstance(v, int) or isinstance(v, bool):
            raise CodecMismatch("integer codec applied to non-integer value")
        if not (_I64_MIN <= v <= _I64_MAX):
            raise ValueOutOfCodecRange("integer outside 64-bit range")


def _require_floats(values):
    for v in values:
        if not isinstance(v, float):
            raise CodecMismatch("float codec applied to non-float value")


def _require_strs(values):
    for v in values:
        if not isinstance(v, str):
            raise CodecMismatch("string codec applied to non-string value")


# --- scalar value serialization used by PLAIN and RLE ---

def _pack_value(vtype, v):
    if vtype == TYPE_INT:
        return struct.pack("<q", v)
    if vtype == TYPE_FLOAT:
        return struct.pack("<d", v)
    b = v.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def _unpack_value(vtype, buf, off):
    if vtype == TYPE_INT:
        if off + 8 > len(buf):
            raise MalformedPayload("truncated int value")
        return struct.unpack_from("<q", buf, off)[0], off + 8
    if vtype == TYPE_FLOAT:
        if off + 8 > len(buf):
            raise MalformedPayload("truncated float value")
        return struct.unpack_from("<d", buf, off)[0], off + 8
    if off + 4 > len(buf):
        raise MalformedPayload("truncated string length")
    (ln,) = struct.unpack_from("<I", buf, off)
    off += 4
    if off + ln > len(buf):
        raise MalformedPayload("truncated string bytes")
    return buf[off : off + ln].decode("utf-8"), off + ln


# --- PLAIN ---

def _encode_plain(values, vtype):
    if vtype == TYPE_INT:
        _require_ints(values)
        payload = np.array(values, dtype="<i8").tobytes() if values else b""
    elif vtype == TYPE_FLOAT:
        _require_floats(values)
        payload = np.array(values, dtype="<f8").tobytes() if values else b""
    elif vtype == TYPE_STR:
        _require_strs(values)
        payload = b"".join(_pack_value(TYPE_STR, v) for v in values)
    else:
        raise UnsupportedType(vtype)
    return EncodedBlock(PLAIN, vtype, len(values), {}, payload)


def _decode_plain(block):
    n = block.row_count
    buf = block.payload
    if block.vtype == TYPE_INT:
        if len(buf) != 8 * n:
            raise MalformedPayload("plain int payload length mismatch")
        return np.frombuffer(buf, dtype="<i8").tolist()
    if block.vtype == TYPE_FLOAT:
        if len(buf) != 8 * n:
            raise MalformedPayload("plain float payload length mismatch")
        return np.frombuffer(buf, dtype="<f8").tolist()
    out = []
    off = 0
    for _ in range(n):
        v, off = _unpack_value(TYPE_STR, buf, off)
        out.append(v)
    if off != len(buf):
        raise MalformedPayload("plain string payload has trailing bytes")
    return out


# --- FOR + bitpacking ---

def _encode_for(values, vtype):
    if vtype != TYPE_INT:
        raise CodecMismatch("frame-of-reference requires integers")
    _require_ints(values)
    if not values:
        return EncodedBlock(FOR_BITPACK, vtype, 0, {"base": 0, "width": 0}, b"")
    base = min(values)
    deltas = [v - base for v in values]
    width = max(deltas).bit_length()
    payload = pack_uints(deltas, width)
    return EncodedBlock(FOR_BITPACK, vtype, len(values), {"base": base, "width": width}, payload)


def _decode_for(block):
    base = block.params["base"]
    width = block.params["width"]
    deltas = unpack_uints(block.payload, block.row_count, width)
    return [base + d for d in deltas]


# --- RLE ---

def _encode_rle(values, vtype):
    if vtype == TYPE_INT:
        _require_ints(values)
    elif vtype == TYPE_FLOAT:
        _require_floats(values)
    elif vtype == TYPE_STR:
        _require_strs(values)
    else:
        raise UnsupportedType(vtype)
    runs = []
    for v in values:
        if runs and runs[-1][0] == v and type(runs[-1][0]) is type(v):
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    runs = [(v, c) for v, c in runs]
    payload = b"".join(struct.pack("<I", c) + _pack_value(vtype, v) for v, c in runs)
    return EncodedBlock(RLE, vtype, len(values), {"runs": runs}, payload)


def _decode_rle(block):
    out = []
    buf = block.payload
    off = 0
    while off < len(buf):
        if off + 4 > len(buf):
            raise MalformedPayload("truncated run count")
        (count,) = struct.unpack_from("<I", buf, off)
        v, off = _unpack_value(block.vtype, buf, off + 4)
        out.extend([v] * count)
    if len(out) != block.row_count:
        raise MalformedPayload("run lengths disagree with row count")
    return out


# --- dictionary ---

def _encode_dict(values, vtype):
    if vtype not in (TYPE_INT, TYPE_STR):
        raise CodecMismatch("dictionary codec requires integers or strings")
    if vtype == TYPE_INT:
        _require_ints(values)
    else:
        _require_strs(values)
    dictionary = []
    index = {}
    codes = []
    for v in values:
        code = index.get(v)
        if code is None:
            code = len(dictionary)
            index[v] = code
            dictionary.append(v)
        codes.append(code)
    width = (len(dictionary) - 1).bit_length() if len(dictionary) > 1 else 0
    payload = pack_uints(codes, width)
    return EncodedBlock(
        DICT, vtype, len(values), {"dictionary": dictionary, "width": width}, payload
    )


def _decode_dict(block):
    dictionary = block.params["dictionary"]
    width = block.params["width"]
    codes = unpack_uints(block.payload, block.row_count, width)
    if block.row_count and not dictionary:
        raise MalformedPayload("empty dictionary with nonzero rows")
    out = []
    for c in codes:
        if c >= len(dictionary):
            raise MalformedPayload("dictionary code out of range")
        out.append(dictionary[c])
    return out


# --- symbol-table strings ---

def _encode_fsst(values, vtype):
    if vtype != TYPE_STR:
        raise CodecMismatch("symbol-table codec requires strings")
    _require_strs(values)
    raw = [v.encode("utf-8") for v in values]
    symbols = fsst.build_symbol_table(raw)
    lookup = {sym: code for code, sym in enumerate(symbols)}
    parts = []
    for b in raw:
        enc = fsst.compress(b, symbols, lookup)
        parts.append(struct.pack("<I", len(enc)) + enc)
    return EncodedBlock(
        FSST_LITE, vtype, len(values), {"symbols": symbols}, b"".join(parts)
    )


def _decode_fsst(block):
    symbols = block.params["symbols"]
    buf = block.payload
    out = []
    off = 0
    for _ in range(block.row_count):
        if off + 4 > len(buf):
            raise MalformedPayload("truncated encoded-string length")
        (ln,) = struct.unpack_from("<I", buf, off)
        off += 4
        if off + ln > len(buf):
            raise MalformedPayload("truncated encoded string")
        out.append(fsst.decompress(buf[off : off + ln], symbols).decode("utf-8"))
        off += ln
    if off != len(buf):
        raise MalformedPayload("symbol-table payload has trailing bytes")
    return out


# --- adaptive decimal scaling for floats ---

def _decimal_scale(values):
    """Smallest exponent e such that round(v*10^e)/10^e reproduces every
    value bit-exactly (losslessness is checked on the reconstruction, not
    on integrality of the product)."""
    for e in range(_MAX_DECIMAL_EXPONENT + 1):
        scale = float(10**e)
        ints = []
        ok = True
        for v in values:
            try:
                i = round(v * scale)
            except (OverflowError, ValueError):
                ok = False
                break
            if not (_I64_MIN <= i <= _I64_MAX):
                ok = False
                break
            if struct.pack("<d", i / scale) != struct.pack("<d", v):
                ok = False
                break
            ints.append(i)
        if ok:
            return e, ints
    return None, None


def _encode_alp(values, vtype):
    if vtype != TYPE_FLOAT:
        raise CodecMismatch("decimal scaling requires floats")
    _require_floats(values)
    exponent, ints = _decimal_scale(values)
    if exponent is None:
        raise ValueOutOfCodecRange("values not exactly representable by decimal scaling")
    inner = _encode_for(ints, TYPE_INT)
    params = {"exponent": exponent, "base": inner.params["base"], "width": inner.params["width"]}
    return EncodedBlock(ALP, vtype, len(values), params, inner.payload)


def _decode_alp(block):
    inner = EncodedBlock(
        FOR_BITPACK,
        TYPE_INT,
        block.row_count,
        {"base": block.params["base"], "width": block.params["width"]},
        block.payload,
    )
    ints = _decode_for(inner)
    scale = float(10 ** block.params["exponent"])
    return [i / scale for i in ints]


_ENCODERS = {
    PLAIN: _encode_plain,
    FOR_BITPACK: _encode_for,
    RLE: _encode_rle,
    DICT: _encode_dict,
    FSST_LITE: _encode_fsst,
    ALP: _encode_alp,
}

_DECODERS = {
    PLAIN: _decode_plain,
    FOR_BITPACK: _decode_for,
    RLE: _decode_rle,
    DICT: _decode_dict,
    FSST_LITE: _decode_fsst,
    ALP: _decode_alp,
}


def encode_block(codec_id, values, vtype):
    enc = _ENCODERS.get(codec_id)
    if enc is None:
        raise UnsupportedType(f"unknown codec id {codec_id}")
    return enc(list(values), vtype)


def decode_block(block):
    dec = _DECODERS.get(block.codec_id)
    if dec is None:
        raise MalformedPayload(f"unknown codec id {block.codec_id}")
    return dec(block)


def encode_auto(values, vtype, codec_id):
    """Encode with `codec_id`, falling back to PLAIN when out of range."""
    try:
        return encode_block(codec_id, values, vtype)
    except ValueOutOfCodecRange:
        return encode_block(PLAIN, values, vtype)


# --- wire form: [codec u8][type u8][rows u32][header][payload] ---

def serialize_block(block):
    head = struct.pack("<BBI", block.codec_id, _TYPE_CODES[block.vtype], block.row_count)
    cid = block.codec_id
    if cid == PLAIN:
        header = b""
    elif cid == FOR_BITPACK:
        header = struct.pack("<qB", block.params["base"], block.params["width"])
    elif cid == RLE:
        header = struct.pack("<I", len(block.params["runs"]))
    elif cid == DICT:
        d = block.params["dictionary"]
        header = struct.pack("<IB", len(d), block.params["width"]) + b"".join(
            _pack_value(block.vtype, v) for v in d
        )
    elif cid == FSST_LITE:
        syms = block.params["symbols"]
        header = struct.pack("<B", len(syms)) + b"".join(
            struct.pack("<B", len(s)) + s for s in syms
        )
    elif cid == ALP:
        header = struct.pack("<BqB", block.params["exponent"], block.params["base"], block.params["width"])
    else:
        raise UnsupportedType(f"unknown codec id {cid}")
    return head + header + block.payload


def parse_block(buf):
    if len(buf) < 6:
        raise MalformedPayload("block shorter than common header")
    codec_id, type_code, rows = struct.unpack_from("<BBI", buf, 0)
    vtype = _TYPE_FROM_CODE.get(type_code)
    if vtype is None:
        raise MalformedPayload(f"unknown type code {type_code}")
    off = 6
    params = {}
    if codec_id == PLAIN:
        pass
    elif codec_id == FOR_BITPACK:
        if off + 9 > len(buf):
            raise MalformedPayload("truncated frame-of-reference header")
        base, width = struct.unpack_from("<qB", buf, off)
        params = {"base": base, "width": width}
        off += 9
    elif codec_id == RLE:
        if off + 4 > len(buf):
            raise MalformedPayload("truncated run-length header")
        (run_count,) = struct.unpack_from("<I", buf, off)
        off += 4
        runs = []
        scan = off
        for _ in range(run_count):
            if scan + 4 > len(buf):
                raise MalformedPayload("truncated run")
            (count,) = struct.unpack_from("<I", buf, scan)
            v, scan = _unpack_value(vtype, buf, scan + 4)
            runs.append((v, count))
        params = {"runs": runs}
    elif codec_id == DICT:
        if off + 5 > len(buf):
            raise MalformedPayload("truncated dictionary header")
        dict_size, width = struct.unpack_from("<IB", buf, off)
        off += 5
        dictionary = []
        for _ in range(dict_size):
            v, off = _unpack_value(vtype, buf, off)
            dictionary.append(v)
        params = {"dictionary": dictionary, "width": width}
    elif codec_id == FSST_LITE:
        if off + 1 > len(buf):
            raise MalformedPayload("truncated symbol count")
        n_syms = buf[off]
        off += 1
        symbols = []
        for _ in range(n_syms):
            if off + 1 > len(buf):
                raise MalformedPayload("truncated symbol length")
            ln = buf[off]
            off += 1
            if off + ln > len(buf):
                raise MalformedPayload("truncated symbol bytes")
            symbols.append(bytes(buf[off : off + ln]))
            off += ln
        params = {"symbols": symbols}
    elif codec_id == ALP:
        if off + 10 > len(buf):
            raise MalformedPayload("truncated decimal-scaling header")
        exponent, base, width = struct.unpack_from("<BqB", buf, off)
        params = {"exponent": exponent, "base": base, "width": width}
        off += 10
    else:
        raise MalformedPayload(f"unknown codec id {codec_id}")
    return EncodedBlock(codec_id, vtype, rows, params, bytes(buf[off:]))

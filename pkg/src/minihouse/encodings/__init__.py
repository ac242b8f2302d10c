"""Column codecs, codec selection, and the vector column layout."""

from .codecs import (
    ALP,
    DICT,
    FOR_BITPACK,
    FSST_LITE,
    LP_VECTOR,
    PLAIN,
    RLE,
    CODEC_NAMES,
    TYPE_FLOAT,
    TYPE_INT,
    TYPE_STR,
    TYPE_VECTOR,
    EncodedBlock,
    decode_block,
    encode_auto,
    encode_block,
    parse_block,
    serialize_block,
)
from .selection import LAMBDA_DECODE, choose_encoding, cost_of, decode_ops, take_sample
from .vectors import (
    VectorColumn,
    VectorStats,
    decode_vectors_lp,
    encode_vectors_lp,
    vector_column_from_bytes,
    vector_column_to_bytes,
)

__all__ = [
    "ALP",
    "DICT",
    "FOR_BITPACK",
    "FSST_LITE",
    "LP_VECTOR",
    "PLAIN",
    "RLE",
    "CODEC_NAMES",
    "TYPE_FLOAT",
    "TYPE_INT",
    "TYPE_STR",
    "TYPE_VECTOR",
    "EncodedBlock",
    "decode_block",
    "encode_auto",
    "encode_block",
    "parse_block",
    "serialize_block",
    "LAMBDA_DECODE",
    "choose_encoding",
    "cost_of",
    "decode_ops",
    "take_sample",
    "VectorColumn",
    "VectorStats",
    "decode_vectors_lp",
    "encode_vectors_lp",
    "vector_column_from_bytes",
    "vector_column_to_bytes",
]

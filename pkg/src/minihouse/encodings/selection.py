"""Sampling-based codec selection.

The writer samples each column and picks the codec minimizing

    cost = encoded_size_bytes + LAMBDA_DECODE * estimated_decode_ops

over the sample. Decode-op estimates per codec (n = sample rows):

    plain        n
    rle          4 * run_count + n
    for_bitpack  2 * n
    dict         2 * n + dictionary_size
    fsst_lite    n + 2 * total_encoded_bytes
    alp          3 * n

Ties break by fixed precedence PLAIN < RLE < FOR_BITPACK < DICT <
FSST_LITE < ALP. Selection is a pure function of (type, sample, lambda).
"""

from ..errors import CodecMismatch, UnsupportedType, ValueOutOfCodecRange
from . import codecs
from .codecs import ALP, DICT, FOR_BITPACK, FSST_LITE, PLAIN, RLE

LAMBDA_DECODE = 0.25
SAMPLE_ROWS = 1024

_CANDIDATES = {
    codecs.TYPE_INT: (PLAIN, RLE, FOR_BITPACK, DICT),
    codecs.TYPE_FLOAT: (PLAIN, RLE, ALP),
    codecs.TYPE_STR: (PLAIN, RLE, DICT, FSST_LITE),
}

_PRECEDENCE = {PLAIN: 0, RLE: 1, FOR_BITPACK: 2, DICT: 3, FSST_LITE: 4, ALP: 5}


def take_sample(values, cap=SAMPLE_ROWS):
    """Head-biased sample: the first `cap` values."""
    return list(values[:cap])


def decode_ops(block):
    n = block.row_count
    cid = block.codec_id
    if cid == PLAIN:
        return n
    if cid == RLE:
        return 4 * len(block.params["runs"]) + n
    if cid == FOR_BITPACK:
        return 2 * n
    if cid == DICT:
        return 2 * n + len(block.params["dictionary"])
    if cid == FSST_LITE:
        total = len(block.payload) - 4 * n  # strip per-string length prefixes
        return n + 2 * max(total, 0)
    if cid == ALP:
        return 3 * n
    raise UnsupportedType(f"unknown codec id {cid}")


def cost_of(codec_id, sample, vtype, lam=LAMBDA_DECODE):
    """Cost of one candidate over the sample, or None when inapplicable."""
    try:
        block = codecs.encode_block(codec_id, sample, vtype)
    except (ValueOutOfCodecRange, CodecMismatch):
        return None, None
    size = len(codecs.serialize_block(block))
    return size + lam * decode_ops(block), block


def choose_encoding(vtype, sample, lam=LAMBDA_DECODE):
    """Pick (codec_id, params) minimizing the documented cost over the sample."""
    candidates = _CANDIDATES.get(vtype)
    if candidates is None:
        raise UnsupportedType(vtype)
    if not sample:
        raise ValueError("sample must be non-empty")
    best = None
    for cid in candidates:
        cost, block = cost_of(cid, sample, vtype, lam)
        if cost is None:
            continue
        key = (cost, _PRECEDENCE[cid])
        if best is None or key < best[0]:
            best = (key, cid, block.params)
    if best is None:
        raise UnsupportedType(f"no applicable codec for type {vtype}")
    return best[1], best[2]

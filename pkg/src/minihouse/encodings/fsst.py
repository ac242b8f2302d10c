"""Static greedy symbol-table compression for string blocks.

A lightweight take on symbol-table string compression: up to 255 multi-byte
symbols (2..8 bytes) are learned from a sample, each output code is one byte,
and code 255 escapes a literal byte. The table is static per block; residual
bytes always remain encodable, so compression never fails.
"""

from collections import Counter

MAX_SYMBOLS = 255
ESCAPE = 255
MIN_SYMBOL_LEN = 2
MAX_SYMBOL_LEN = 8
_SAMPLE_BYTE_CAP = 1 << 16


def build_symbol_table(samples):
    """Learn up to MAX_SYMBOLS symbols from an iterable of byte strings.

    Greedy by saved bytes: a symbol of length L occurring f times saves
    (L - 1) * f output bytes. Deterministic for a fixed sample.
    """
    counts = Counter()
    budget = _SAMPLE_BYTE_CAP
    for s in samples:
        if budget <= 0:
            break
        s = s[:budget]
        budget -= len(s)
        for length in range(MIN_SYMBOL_LEN, MAX_SYMBOL_LEN + 1):
            for i in range(len(s) - length + 1):
                counts[s[i : i + length]] += 1
    scored = [
        ((len(sym) - 1) * freq, sym)
        for sym, freq in counts.items()
        if freq >= 2
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [sym for _, sym in scored[:MAX_SYMBOLS]]


def compress(data, symbols, lookup=None):
    """Encode `data` with the symbol table; unmatched bytes are escaped."""
    if lookup is None:
        lookup = {sym: code for code, sym in enumerate(symbols)}
    out = bytearray()
    i = 0
    n = len(data)
    while i < n:
        matched = False
        for length in range(min(MAX_SYMBOL_LEN, n - i), MIN_SYMBOL_LEN - 1, -1):
            code = lookup.get(data[i : i + length])
            if code is not None:
                out.append(code)
                i += length
                matched = True
                break
        if not matched:
            out.append(ESCAPE)
            out.append(data[i])
            i += 1
    return bytes(out)


def decompress(data, symbols):
    out = bytearray()
    i = 0
    n = len(data)
    while i < n:
        code = data[i]
        if code == ESCAPE:
            if i + 1 >= n:
                from ..errors import MalformedPayload

                raise MalformedPayload("dangling escape byte")
            out.append(data[i + 1])
            i += 2
        else:
            if code >= len(symbols):
                from ..errors import MalformedPayload

                raise MalformedPayload("symbol code out of table range")
            out.extend(symbols[code])
            i += 1
    return bytes(out)

"""CRC-32C (Castagnoli polynomial, reflected), table-driven.

Used for every checksummed region: file regions and descriptors, and
write-ahead-log records. Known-answer: crc32c(b"123456789") == 0xE3069283.
"""

_POLY_REFLECTED = 0x82F63B78


def _build_table():
    table = []
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ _POLY_REFLECTED if c & 1 else c >> 1
        table.append(c)
    return tuple(table)


_TABLE = _build_table()


def crc32c(data, crc=0):
    """Checksum of `data`, optionally continuing from a prior value."""
    table = _TABLE
    crc ^= 0xFFFFFFFF
    for b in memoryview(data):
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF

"""Write-ahead log: length-prefixed, CRC-checked JSON records.

Frame layout: [u32 payload_len][u32 crc32c(payload)][payload]. Replay stops
at the first torn or corrupt tail record, so a crash mid-append never
poisons recovery.
"""

import json
import os
import struct
from pathlib import Path

from ..crc import crc32c

_FRAME = struct.Struct("<II")


class WriteAheadLog:
    def __init__(self, path, fsync=False):
        self.path = Path(path)
        self.fsync = fsync
        self._fh = None

    def _handle(self):
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "ab")
        return self._fh

    def append(self, record):
        payload = json.dumps(record, separators=(",", ":")).encode("utf-8")
        fh = self._handle()
        fh.write(_FRAME.pack(len(payload), crc32c(payload)) + payload)
        fh.flush()
        if self.fsync:
            os.fsync(fh.fileno())

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def replay(self):
        """Yield records up to the first torn or corrupt frame."""
        if not self.path.exists():
            return []
        data = self.path.read_bytes()
        records = []
        off = 0
        while off + _FRAME.size <= len(data):
            length, crc = _FRAME.unpack_from(data, off)
            start = off + _FRAME.size
            end = start + length
            if end > len(data):
                break  # torn tail
            payload = data[start:end]
            if crc32c(payload) != crc:
                break
            records.append(json.loads(payload.decode("utf-8")))
            off = end
        return records

    def rewrite(self, records):
        """Atomically replace the log contents (used after a flush)."""
        self.close()
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            for record in records:
                payload = json.dumps(record, separators=(",", ":")).encode("utf-8")
                fh.write(_FRAME.pack(len(payload), crc32c(payload)) + payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

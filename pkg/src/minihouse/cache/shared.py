"""Shared chunk cache over a directory-backed remote store, simulated in
one process: blocks (12 MB default) are placed on cache nodes by
consistent hashing and divided into 4 MB chunks indexed per node; writes
buffer chunks at the owning node, flush completed blocks concurrently as
temporary objects, and a lightweight concat merges them into the final
backend file (atomic: a failure before concat leaves nothing visible).
"""

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

from ..errors import ConcatConflict, IoError, NotFound
from .ring import HashRing

MB = 1 << 20
DEFAULT_BLOCK_BYTES = 12 * MB
DEFAULT_CHUNK_BYTES = 4 * MB


class DirectoryBackend:
    """The 'remote' store: a local directory tree with byte counters."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.reads = 0
        self.bytes_read = 0

    def _path(self, name):
        p = (self.root / name).resolve()
        if self.root.resolve() not in p.parents and p != self.root.resolve():
            raise IoError(f"path {name!r} escapes the backend root")
        return p

    def exists(self, name):
        return self._path(name).is_file()

    def size(self, name):
        p = self._path(name)
        if not p.is_file():
            raise NotFound(name)
        return p.stat().st_size

    def read(self, name, offset, length):
        p = self._path(name)
        if not p.is_file():
            raise NotFound(name)
        with open(p, "rb") as fh:
            fh.seek(offset)
            data = fh.read(length)
        self.reads += 1
        self.bytes_read += len(data)
        return data

    def write(self, name, data):
        p = self._path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)

    def append_to(self, name, data):
        p = self._path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "ab") as fh:
            fh.write(data)

    def rename(self, src, dst):
        target = self._path(dst)
        target.parent.mkdir(parents=True, exist_ok=True)
        os.replace(self._path(src), target)

    def delete(self, name):
        try:
            self._path(name).unlink()
        except FileNotFoundError:
            pass

    def temp_objects(self):
        return sorted(
            str(p.relative_to(self.root))
            for p in self.root.rglob(".tmp-*")
            if p.is_file()
        )


@dataclass
class CacheNodeStats:
    chunk_hits: int = 0
    chunk_misses: int = 0
    bytes_cached: int = 0


class CacheNode:
    """One simulated cache node: an in-memory chunk index standing in for
    local SSD, plus a per-block write staging area."""

    def __init__(self, node_id):
        self.node_id = node_id
        self.chunks: Dict[Tuple[str, int], bytes] = {}  # (path, chunk index) -> bytes
        self.staging: Dict[Tuple[str, int], Dict[int, bytes]] = {}  # (path, block) -> chunk idx -> bytes
        self.stats = CacheNodeStats()
        self.lock = threading.Lock()


class SharedChunkCache:
    """Coordinator (passive registry) + cache nodes over one backend."""

    def __init__(
        self,
        backend,
        nodes=4,
        block_bytes=DEFAULT_BLOCK_BYTES,
        chunk_bytes=DEFAULT_CHUNK_BYTES,
        vnodes=64,
        flush_workers=4,
    ):
        if block_bytes % chunk_bytes:
            raise IoError("block size must be a multiple of the chunk size")
        self.backend = backend
        self.block_bytes = block_bytes
        self.chunk_bytes = chunk_bytes
        self.flush_workers = flush_workers
        self.node_ids = [f"cn{i}" for i in range(nodes)]
        self.nodes = {nid: CacheNode(nid) for nid in self.node_ids}
        self.ring = HashRing(self.node_ids, vnodes)
        self.namespace: Dict[str, dict] = {}  # coordinator registry: path -> metadata
        self.events: List[Tuple[str, str, int, str]] = []  # (event, path, block, node)
        self._events_lock = threading.Lock()
        self._writing = set()
        # test hook: a threading.Barrier makes concurrent flushes rendezvous
        # between their start and end events, so overlap is observable
        self.flush_barrier = None

    # --- placement ---

    def block_id(self, path, block_index):
        return f"{path}::b{block_index}"

    def node_for_block(self, path, block_index):
        return self.ring.place(self.block_id(path, block_index))

    def _register(self, path):
        meta = self.namespace.get(path)
        if meta is None:
            size = self.backend.size(path)
            n_blocks = (size + self.block_bytes - 1) // self.block_bytes
            meta = {
                "size": size,
                "blocks": {b: self.node_for_block(path, b) for b in range(n_blocks)},
            }
            self.namespace[path] = meta
        return meta

    def size(self, path):
        return self._register(path)["size"]

    def invalidate(self, path):
        self.namespace.pop(path, None)
        for node in self.nodes.values():
            with node.lock:
                for key in [k for k in node.chunks if k[0] == path]:
                    node.stats.bytes_cached -= len(node.chunks[key])
                    del node.chunks[key]

    # --- read path ---

    def read(self, path, offset, length, io=None):
        """Serve bytes chunk by chunk from the owning nodes, faulting
        missing chunks in from the backend. `io` collects per-call stats."""
        meta = self._register(path)
        size = meta["size"]
        if offset < 0 or length < 0 or offset + length > size:
            raise IoError(f"range [{offset}, {offset + length}) outside file of {size} bytes")
        out = bytearray()
        pos = offset
        end = offset + length
        while pos < end:
            ci = pos // self.chunk_bytes
            cstart = ci * self.chunk_bytes
            clen = min(self.chunk_bytes, size - cstart)
            bi = cstart // self.block_bytes
            node = self.nodes[meta["blocks"].get(bi) or self.node_for_block(path, bi)]
            with node.lock:
                chunk = node.chunks.get((path, ci))
                if chunk is None:
                    chunk = self.backend.read(path, cstart, clen)
                    node.chunks[(path, ci)] = chunk
                    node.stats.chunk_misses += 1
                    node.stats.bytes_cached += len(chunk)
                    if io is not None:
                        io["backend_bytes"] = io.get("backend_bytes", 0) + len(chunk)
                        io["chunk_misses"] = io.get("chunk_misses", 0) + 1
                else:
                    node.stats.chunk_hits += 1
                    if io is not None:
                        io["chunk_hits"] = io.get("chunk_hits", 0) + 1
            take_from = pos - cstart
            take_to = min(end, cstart + clen) - cstart
            out += chunk[take_from:take_to]
            pos = cstart + take_to
        return bytes(out)

    # --- write path ---

    def write_file(self, path, data, fail_before_concat=False):
        """Buffer chunks on owning nodes, flush completed blocks in
        parallel as temporary objects, then concat into the final file."""
        if path in self._writing:
            raise ConcatConflict(f"{path!r} is already being written")
        self._writing.add(path)
        try:
            n_blocks = max(1, (len(data) + self.block_bytes - 1) // self.block_bytes)
            block_nodes = {}
            for bi in range(n_blocks):
                node = self.nodes[self.node_for_block(path, bi)]
                block_nodes[bi] = node
                bstart = bi * self.block_bytes
                bdata = data[bstart : bstart + self.block_bytes]
                with node.lock:
                    stage = node.staging.setdefault((path, bi), {})
                    for ci_local in range(0, max(1, (len(bdata) + self.chunk_bytes - 1) // self.chunk_bytes)):
                        cstart = ci_local * self.chunk_bytes
                        stage[ci_local] = bytes(bdata[cstart : cstart + self.chunk_bytes])

            temp_names = {bi: f".tmp-{path.replace('/', '_')}-{bi:06d}" for bi in range(n_blocks)}

            def flush_block(bi):
                node = block_nodes[bi]
                with self._events_lock:
                    self.events.append(("flush_start", path, bi, node.node_id))
                if self.flush_barrier is not None:
                    self.flush_barrier.wait(timeout=10)
                with node.lock:
                    stage = node.staging.pop((path, bi), {})
                blob = b"".join(stage[ci] for ci in sorted(stage))
                self.backend.write(temp_names[bi], blob)
                with self._events_lock:
                    self.events.append(("flush_end", path, bi, node.node_id))
                return bi

            with ThreadPoolExecutor(max_workers=self.flush_workers) as pool:
                list(pool.map(flush_block, range(n_blocks)))

            if fail_before_concat:
                raise IoError("simulated failure before concat")

            # concat: sequential append of temporaries, then atomic rename
            partial = f".tmp-{path.replace('/', '_')}-concat"
            self.backend.write(partial, b"")
            for bi in range(n_blocks):
                self.backend.append_to(partial, self.backend.read(temp_names[bi], 0, self.backend.size(temp_names[bi])))
                self.backend.delete(temp_names[bi])
            self.backend.rename(partial, path)
            self.invalidate(path)
        finally:
            self._writing.discard(path)

    def gc_temps(self):
        """Discard temporary objects left by failed writes."""
        for name in self.backend.temp_objects():
            self.backend.delete(name)

    def stats(self):
        agg = {"chunk_hits": 0, "chunk_misses": 0, "bytes_cached": 0}
        for node in self.nodes.values():
            agg["chunk_hits"] += node.stats.chunk_hits
            agg["chunk_misses"] += node.stats.chunk_misses
            agg["bytes_cached"] += node.stats.bytes_cached
        return agg

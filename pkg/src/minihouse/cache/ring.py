"""Consistent hashing with virtual nodes for chunk/block placement.

Placement is deterministic (keyed blake2b, no process-salted hashing);
removing a node remaps only the keys it owned, and adding one never moves
keys between two surviving nodes.
"""

import bisect
import hashlib

from ..errors import EmptyRing

DEFAULT_VNODES = 64


def _h64(data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


class HashRing:
    def __init__(self, nodes=(), vnodes=DEFAULT_VNODES):
        self.vnodes = vnodes
        self.nodes = set()
        self._hashes = []  # sorted vnode positions
        self._owners = []  # node id per position
        for n in nodes:
            self.add_node(n)

    def _rebuild(self, points):
        points.sort(key=lambda p: p[0])
        self._hashes = [h for h, _ in points]
        self._owners = [n for _, n in points]

    def _points(self):
        return list(zip(self._hashes, self._owners))

    def add_node(self, node_id):
        if node_id in self.nodes:
            return
        self.nodes.add(node_id)
        points = self._points()
        points.extend((_h64(f"{node_id}#{i}"), node_id) for i in range(self.vnodes))
        self._rebuild(points)

    def remove_node(self, node_id):
        self.nodes.discard(node_id)
        self._rebuild([(h, n) for h, n in self._points() if n != node_id])

    def place(self, key):
        """Owning node for a chunk or block id (str or bytes)."""
        if not self._hashes:
            raise EmptyRing("hash ring has no nodes")
        h = _h64(key)
        idx = bisect.bisect_left(self._hashes, h)
        if idx == len(self._hashes):
            idx = 0
        return self._owners[idx]

"""Lineage-tagged change records flowing through incremental operators."""

from dataclasses import dataclass


@dataclass(frozen=True)
class DeltaRow:
    """One row-level change: an update is a delete(old) + insert(new) pair
    sharing tuple_key with increasing update_seq."""

    tuple_key: tuple
    update_seq: int
    kind: str  # "insert" | "delete"
    payload: dict

    @property
    def sign(self):
        return 1 if self.kind == "insert" else -1


def order_key(value):
    """Total order over heterogeneous keys (None < numbers < str < tuple);
    stable across processes, unlike hash-based orderings."""
    if value is None:
        return (0, 0)
    if isinstance(value, bool):
        return (1, int(value))
    if isinstance(value, (int, float)):
        return (1, value)
    if isinstance(value, str):
        return (2, value)
    if isinstance(value, tuple):
        return (3, tuple(order_key(v) for v in value))
    return (4, repr(value))


def sort_deltas(deltas):
    """Canonical processing order: (tuple_key, update_seq, kind)."""
    return sorted(deltas, key=lambda d: (order_key(d.tuple_key), d.update_seq, d.kind))

"""Exception types shared across the engine.

Grouped by the subsystem that raises them; everything derives from
MinihouseError so callers can catch broadly.
"""


class MinihouseError(Exception):
    pass


# --- columnar file format ---

class BadMagic(MinihouseError):
    pass


class UnsupportedVersion(MinihouseError):
    pass


class FooterChecksumMismatch(MinihouseError):
    pass


class CorruptDescriptor(MinihouseError):
    """A descriptor failed its checksum; the handle stays usable for
    verify_integrity but operations needing that descriptor raise this."""


class SortViolation(MinihouseError):
    pass


class SchemaMismatch(MinihouseError):
    pass


class NoSortKey(MinihouseError):
    pass


class UnknownColumn(MinihouseError):
    pass


class OutOfRange(MinihouseError):
    pass


class CodecMismatch(MinihouseError):
    pass


class BlockChecksumMismatch(MinihouseError):
    pass


# --- codecs ---

class UnsupportedType(MinihouseError):
    pass


class ValueOutOfCodecRange(MinihouseError):
    pass


class MalformedPayload(MinihouseError):
    pass


# --- table engine ---

class TxnClosed(MinihouseError):
    pass


class WriterBusy(MinihouseError):
    pass


class UnknownTable(MinihouseError):
    pass


# --- compaction ---

class InvalidConfig(MinihouseError):
    pass


class SegmentRetired(MinihouseError):
    pass


# --- incremental views ---

class UnsupportedAggregate(MinihouseError):
    pass


class KeyMismatch(MinihouseError):
    pass


class StateInconsistent(MinihouseError):
    pass


class EmptyHistory(MinihouseError):
    pass


class SnapshotRetired(MinihouseError):
    pass


class ViewError(MinihouseError):
    pass


# --- hybrid retrieval ---

class DomainTooLarge(MinihouseError):
    pass


class DimensionMismatch(MinihouseError):
    pass


# --- cache plane ---

class EmptyRing(MinihouseError):
    pass


class NotFound(MinihouseError):
    pass


class IoError(MinihouseError):
    pass


class ConcatConflict(MinihouseError):
    pass


class AllPinned(MinihouseError):
    pass

"""minihouse: an embeddable analytical table engine at desk scale.

Columnar `.snf` files with co-located indexes and metadata, a WAL-backed
staging write path with MVCC snapshots, adaptive compaction, incremental
view maintenance, hybrid lexical+vector retrieval with rank fusion, and a
two-tier cache simulator.
"""

__version__ = "0.1.0"

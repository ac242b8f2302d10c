"""Incremental processing: delta operators, view refresh, refresh control."""

from .aggregate import AggSpec, AggState, apply_delta_agg
from .deltas import DeltaRow, order_key, sort_deltas
from .joins import (
    OuterJoinState,
    WorkCounters,
    apply_rows,
    canon,
    inner_join_delta,
    outer_join_delta,
)
from .refresh import SOURCE_AVG, SOURCE_LAST, RefreshConfig, next_refresh_interval, refresh_trace
from .views import (
    AggregateNode,
    FilterNode,
    JoinNode,
    MaterializedView,
    ProjectNode,
    RefreshResult,
    SourceNode,
    ViewDefinition,
    parse_view_text,
    recompute_view,
    resolve_columns,
)

__all__ = [
    "AggSpec",
    "AggState",
    "apply_delta_agg",
    "DeltaRow",
    "order_key",
    "sort_deltas",
    "OuterJoinState",
    "WorkCounters",
    "apply_rows",
    "canon",
    "inner_join_delta",
    "outer_join_delta",
    "SOURCE_AVG",
    "SOURCE_LAST",
    "RefreshConfig",
    "next_refresh_interval",
    "refresh_trace",
    "AggregateNode",
    "FilterNode",
    "JoinNode",
    "MaterializedView",
    "ProjectNode",
    "RefreshResult",
    "SourceNode",
    "ViewDefinition",
    "parse_view_text",
    "recompute_view",
    "resolve_columns",
]

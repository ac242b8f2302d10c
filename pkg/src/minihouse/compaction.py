"""Bounded linear compaction control and MVCC-safe merge execution.

The controller maps delta-segment pressure to an intensity alpha in [0, 1]:

    alpha = min(1, max(0, k * (n_delta / n_star - 1)))

alpha then scales the merge batch size and the trigger period linearly:

    batch  = round(2 + alpha * (max_batch - 2))
    period = base_period * (1 - alpha) + min_period * alpha

Near equilibrium the controller stays quiet; as deltas accumulate it
merges larger batches more often until it saturates.
"""

from dataclasses import dataclass
from typing import List, Optional

from .errors import InvalidConfig, SegmentRetired


@dataclass
class ControllerConfig:
    n_star: int = 10
    k: float = 0.5
    max_batch: int = 8
    base_period: float = 4.0
    min_period: Optional[float] = None  # defaults to base_period / 8

    def __post_init__(self):
        if self.n_star < 1:
            raise InvalidConfig("n_star must be >= 1")
        if self.k <= 0:
            raise InvalidConfig("k must be > 0")
        if self.max_batch < 2:
            raise InvalidConfig("max_batch must be >= 2")
        if self.min_period is None:
            self.min_period = self.base_period / 8


@dataclass
class MergePlan:
    inputs: List[str]  # segment names, oldest first
    batch_size: int
    period: float
    priority: float  # = alpha; recorded, not acted on in a single queue
    target_kind: str = "stable"


def intensity(n_delta, n_star, k):
    """Compaction intensity alpha; exact, pure, clamped to [0, 1]."""
    if n_star < 1:
        raise InvalidConfig("n_star must be >= 1")
    return min(1.0, max(0.0, k * (n_delta / n_star - 1.0)))


def plan_compaction(live_deltas, alpha, cfg):
    """Build a merge plan for the oldest deltas; empty plan at alpha == 0."""
    if alpha <= 0.0:
        return None
    batch = round(2 + alpha * (cfg.max_batch - 2))
    period = cfg.base_period * (1.0 - alpha) + cfg.min_period * alpha
    ordered = sorted(live_deltas, key=lambda s: (s.min_version, s.name))
    inputs = [s.name for s in ordered[:batch]]
    if len(inputs) < 2:
        return None
    return MergePlan(inputs, batch, period, alpha)


def execute_merge(plan, engine):
    """Run the plan through the engine; raises SegmentRetired when the plan
    lost a race with another merge."""
    live = {s.name for s in engine.live_delta_segments()}
    for name in plan.inputs:
        if name not in live:
            raise SegmentRetired(name)
    return engine.merge_segments(plan.inputs)


@dataclass
class TickLog:
    tick: int
    n_delta: int
    alpha: float
    batch: int
    merged: bool


class CompactionDriver:
    """Tick-driven scheduler: evaluates the controller every tick and
    executes a merge when the alpha-scaled period has elapsed."""

    def __init__(self, engine, cfg=None):
        self.engine = engine
        self.cfg = cfg or ControllerConfig()
        self.ticks = 0
        self._since_merge = float("inf")
        self.log: List[TickLog] = []

    def tick(self):
        self.ticks += 1
        self._since_merge += 1
        deltas = self.engine.live_delta_segments()
        alpha = intensity(len(deltas), self.cfg.n_star, self.cfg.k)
        plan = plan_compaction(deltas, alpha, self.cfg)
        merged = False
        if plan is not None and self._since_merge >= plan.period:
            execute_merge(plan, self.engine)
            self._since_merge = 0
            merged = True
        entry = TickLog(self.ticks, len(deltas), alpha, plan.batch_size if plan else 0, merged)
        self.log.append(entry)
        return entry

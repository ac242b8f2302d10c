"""Window-based stabilization of refresh intervals.

Recent refresh durations T_1..T_N form a sliding window whose mean smooths
transient spikes. The next interval scales the source duration by k and
clamps it between a fixed floor and a load-adaptive ceiling:

    t_avg       = mean(T_1..T_N)
    dt_max(U)   = dt_base * (1 + alpha * U)
    dt          = min(max(k * t_src, dt_min), dt_max(U))

where t_src is t_last or t_avg depending on cfg.source. The ceiling grows
under high utilization U to reduce contention and contracts when idle.
"""

from dataclasses import dataclass

from ..errors import EmptyHistory, InvalidConfig

SOURCE_LAST = "last"
SOURCE_AVG = "avg"


@dataclass(frozen=True)
class RefreshConfig:
    k: float = 2.0
    dt_min: float = 5.0
    dt_base: float = 60.0
    alpha: float = 0.5
    window: int = 5
    source: str = SOURCE_AVG

    def __post_init__(self):
        if self.dt_min <= 0:
            raise InvalidConfig("dt_min must be > 0")
        if self.dt_base < self.dt_min:
            raise InvalidConfig("dt_base must be >= dt_min")
        if self.window < 1:
            raise InvalidConfig("window must be >= 1")
        if self.source not in (SOURCE_LAST, SOURCE_AVG):
            raise InvalidConfig(f"unknown source {self.source!r}")


def refresh_trace(history, t_last, utilization, cfg):
    """All intermediate quantities of the interval computation."""
    if not history:
        raise EmptyHistory("refresh history must be non-empty")
    if not 0.0 <= utilization <= 1.0:
        raise InvalidConfig("utilization must lie in [0, 1]")
    window = list(history[-cfg.window :])
    t_avg = sum(window) / len(window)
    t_src = t_last if cfg.source == SOURCE_LAST else t_avg
    dt_max = cfg.dt_base * (1.0 + cfg.alpha * utilization)
    raw = cfg.k * t_src
    dt = min(max(raw, cfg.dt_min), dt_max)
    return {
        "window": window,
        "t_avg": t_avg,
        "t_last": t_last,
        "t_src": t_src,
        "raw": raw,
        "dt_min": cfg.dt_min,
        "dt_max": dt_max,
        "utilization": utilization,
        "dt": dt,
    }


def next_refresh_interval(history, t_last, utilization, cfg):
    """The next refresh interval in seconds; pure function of its inputs."""
    return refresh_trace(history, t_last, utilization, cfg)["dt"]

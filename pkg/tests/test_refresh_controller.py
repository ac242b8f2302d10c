import random

import pytest

from minihouse.errors import EmptyHistory, InvalidConfig
from minihouse.ivm import RefreshConfig, next_refresh_interval, refresh_trace


def cfg(**kw):
    base = dict(k=2.0, dt_min=5.0, dt_base=60.0, alpha=0.5, window=5, source="last")
    base.update(kw)
    return RefreshConfig(**base)


class TestWorkedExamples:
    def test_scaled_duration_inside_bounds(self):
        # k*T_last = 20 lies between dt_min=5 and dt_max(0)=60
        assert next_refresh_interval([10.0], 10.0, 0.0, cfg()) == 20.0

    def test_lower_clamp(self):
        assert next_refresh_interval([1.0], 1.0, 0.0, cfg()) == 5.0

    def test_upper_clamp_scales_with_utilization(self):
        # dt_max(1) = 60 * (1 + 0.5) = 90; k*T_last = 120 clamps to 90
        assert next_refresh_interval([60.0], 60.0, 1.0, cfg()) == 90.0

    def test_window_mean_source(self):
        c = cfg(source="avg", window=3)
        # T_avg over the last 3 observations: (4 + 6 + 8) / 3 = 6
        trace = refresh_trace([2.0, 4.0, 6.0, 8.0], 8.0, 0.0, c)
        assert trace["t_avg"] == 6.0
        assert trace["dt"] == 12.0


class TestLaws:
    def test_interval_always_within_bounds(self):
        rnd = random.Random(17)
        for _ in range(1000):
            c = cfg(
                k=rnd.uniform(0.1, 5),
                dt_min=rnd.uniform(0.1, 10),
                dt_base=rnd.uniform(10, 100),
                alpha=rnd.uniform(0, 2),
                window=rnd.randint(1, 6),
                source=rnd.choice(["last", "avg"]),
            )
            history = [rnd.uniform(0, 50) for _ in range(rnd.randint(1, 8))]
            u = rnd.random()
            dt = next_refresh_interval(history, history[-1], u, c)
            assert c.dt_min <= dt <= c.dt_base * (1 + c.alpha * u) + 1e-12

    def test_monotone_in_source_duration_and_utilization(self):
        c = cfg()
        values = [next_refresh_interval([t], t, 0.0, c) for t in range(0, 100)]
        assert values == sorted(values)
        values = [next_refresh_interval([50.0], 50.0, u / 100, c) for u in range(101)]
        assert values == sorted(values)

    def test_empty_history(self):
        with pytest.raises(EmptyHistory):
            next_refresh_interval([], 1.0, 0.0, cfg())

    def test_invalid_inputs(self):
        with pytest.raises(InvalidConfig):
            RefreshConfig(dt_min=0)
        with pytest.raises(InvalidConfig):
            RefreshConfig(dt_min=10, dt_base=5)
        with pytest.raises(InvalidConfig):
            RefreshConfig(window=0)
        with pytest.raises(InvalidConfig):
            next_refresh_interval([1.0], 1.0, 1.5, cfg())

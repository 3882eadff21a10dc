import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manetsim.engine import (
    EventKind,
    InvalidRange,
    KeyedStream,
    RandomStream,
    SchedulingInPast,
    Simulator,
    rng_uniform,
)


def test_event_at_time_zero_fires_first():
    sim = Simulator()
    log = []
    sim.schedule(1.0, log.append, "late")
    sim.schedule(0.0, log.append, "zero")
    sim.run_until(2.0)
    assert log == ["zero", "late"]


def test_same_time_events_fire_in_insertion_order():
    sim = Simulator()
    log = []
    sim.schedule(5.0, log.append, "A")
    sim.schedule(5.0, log.append, "B")
    sim.run_until(10)
    assert log == ["A", "B"]


def test_scheduling_in_the_past_is_rejected():
    sim = Simulator()
    sim.run_until(5.0)
    with pytest.raises(SchedulingInPast):
        sim.schedule(4.9, lambda: None)
    with pytest.raises(SchedulingInPast):
        sim.schedule_in(-0.1, lambda: None)


def test_cancel_semantics():
    sim = Simulator()
    log = []
    h = sim.schedule(1.0, log.append, "x")
    assert sim.cancel(h) is True
    assert sim.cancel(h) is False
    sim.run_until(2.0)
    assert log == []

    fired = sim.schedule(3.0, log.append, "y")
    sim.run_until(4.0)
    assert log == ["y"]
    assert sim.cancel(fired) is False


def test_empty_queue_advances_clock():
    sim = Simulator()
    assert sim.run_until(150) == 0
    assert sim.now == 150


def test_flow_start_events_fire_in_time_order():
    sim = Simulator()
    log = []
    for t in (60.0, 5.0, 35.0):
        sim.schedule(t, log.append, t, kind=EventKind.FLOW_START)
    assert sim.run_until(150) == 3
    assert log == [5.0, 35.0, 60.0]


def test_events_past_horizon_stay_queued():
    sim = Simulator()
    log = []
    sim.schedule(1.0, log.append, 1)
    sim.schedule(3.0, log.append, 3)
    assert sim.run_until(2.0) == 1
    assert len(sim) == 1
    sim.run_until(3.0)
    assert log == [1, 3]


def test_callbacks_can_schedule_more_events():
    sim = Simulator()
    times = []

    def tick():
        times.append(sim.now)
        if sim.now < 1.0:
            sim.schedule_in(0.25, tick)

    sim.schedule(0.0, tick)
    sim.run_until(5)
    assert times == [0.0, 0.25, 0.5, 0.75, 1.0]


@given(st.lists(st.floats(0, 100, allow_nan=False), max_size=40))
def test_fire_order_is_sorted_and_stable(times):
    sim = Simulator()
    fired = []
    for i, t in enumerate(times):
        sim.schedule(t, lambda i=i: fired.append((sim.now_ticks, i)))
    sim.run_until(100)
    assert fired == sorted(fired)
    assert len(fired) == len(times)


@given(st.lists(st.booleans(), min_size=1, max_size=30))
def test_cancelled_events_never_fire(mask):
    sim = Simulator()
    fired = []
    handles = [sim.schedule(i * 0.1, fired.append, i) for i in range(len(mask))]
    for h, cancel in zip(handles, mask):
        if cancel:
            sim.cancel(h)
    sim.run_until(10)
    assert fired == [i for i, c in enumerate(mask) if not c]


def test_uniform_degenerate_interval():
    assert rng_uniform(RandomStream(1, "x"), 3, 3) == 3


def test_uniform_rejects_inverted_range():
    with pytest.raises(InvalidRange):
        rng_uniform(RandomStream(1, "x"), 2, 1)
    with pytest.raises(InvalidRange):
        KeyedStream(1, "x").uniform("k", 2, 1)


def test_uniform_mean():
    s = RandomStream(7, "stat")
    draws = [s.uniform(0, 1) for _ in range(100_000)]
    assert abs(statistics.fmean(draws) - 0.5) < 0.01
    assert all(0 <= d < 1 for d in draws)


def test_streams_are_reproducible_and_independent():
    a = [RandomStream(3, "mobility").uniform(0, 1) for _ in range(1)]
    s1, s2 = RandomStream(3, "mobility"), RandomStream(3, "mobility")
    assert [s1.uniform(0, 1) for _ in range(100)] == [s2.uniform(0, 1) for _ in range(100)]
    other = RandomStream(3, "jitter")
    assert other.uniform(0, 1) != a[0]
    assert RandomStream(4, "mobility").uniform(0, 1) != a[0]


@given(st.integers(0, 2**32), st.text(max_size=10), st.floats(-1e3, 1e3), st.floats(0, 1e3))
def test_uniform_stays_in_half_open_range(seed, label, lo, width):
    hi = lo + width
    v = RandomStream(seed, label).uniform(lo, hi)
    assert lo <= v <= hi
    if hi > lo:
        assert v < hi


def test_keyed_stream_depends_only_on_key():
    ks = KeyedStream(9, "jitter")
    first = ks.unit(("pkt", 5))
    for k in range(50):
        ks.unit(("other", k))
    assert KeyedStream(9, "jitter").unit(("pkt", 5)) == first
    assert ks.unit(("pkt", 5)) == first
    assert KeyedStream(10, "jitter").unit(("pkt", 5)) != first


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_keyed_unit_in_range(key):
    u = KeyedStream(1, "j").unit(key)
    assert 0.0 <= u < 1.0

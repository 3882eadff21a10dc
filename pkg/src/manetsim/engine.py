"""Discrete-event core: clock, ordered event queue and seeded random streams."""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
import struct
from typing import Any, Callable

US_PER_S = 1_000_000


class SchedulingInPast(ValueError):
    pass


class InvalidRange(ValueError):
    pass


class EventKind(enum.Enum):
    PACKET_DELIVERY = "PacketDelivery"
    TIMER = "Timer"
    MOBILITY_UPDATE = "MobilityUpdate"
    FLOW_START = "FlowStart"
    METRICS_TICK = "MetricsTick"


def to_ticks(seconds: float) -> int:
    """Quantize seconds to the 1 us clock grid."""
    return int(round(seconds * US_PER_S))


class Event:
    """A scheduled occurrence. Also serves as the cancellation handle."""

    __slots__ = ("tick", "sequence", "kind", "callback", "args", "state")

    PENDING, FIRED, CANCELLED = 0, 1, 2

    def __init__(self, tick, sequence, kind, callback, args):
        self.tick = tick
        self.sequence = sequence
        self.kind = kind
        self.callback = callback
        self.args = args
        self.state = Event.PENDING

    @property
    def fire_at(self) -> float:
        return self.tick / US_PER_S

    @property
    def pending(self) -> bool:
        return self.state == Event.PENDING

    def __lt__(self, other: "Event") -> bool:
        return (self.tick, self.sequence) < (other.tick, other.sequence)

    def __repr__(self):
        return f"Event({self.fire_at:.6f}, #{self.sequence}, {self.kind.value})"


EventHandle = Event


class Simulator:
    """Single-threaded event loop ordered by (fire time, insertion sequence)."""

    def __init__(self):
        self._heap: list[Event] = []
        self._sequence = 0
        self._tick = 0
        self.fired = 0

    @property
    def now(self) -> float:
        return self._tick / US_PER_S

    @property
    def now_ticks(self) -> int:
        return self._tick

    def __len__(self):
        return sum(1 for ev in self._heap if ev.pending)

    def schedule(self, at: float, callback: Callable[..., Any], *args,
                 kind: EventKind = EventKind.TIMER) -> Event:
        tick = to_ticks(at)
        if tick < self._tick:
            raise SchedulingInPast(f"cannot schedule at {at} (clock is {self.now})")
        ev = Event(tick, self._sequence, kind, callback, args)
        self._sequence += 1
        heapq.heappush(self._heap, ev)
        return ev

    def schedule_in(self, delay: float, callback: Callable[..., Any], *args,
                    kind: EventKind = EventKind.TIMER) -> Event:
        if delay < 0:
            raise SchedulingInPast(f"negative delay {delay}")
        ev = Event(self._tick + to_ticks(delay), self._sequence, kind, callback, args)
        self._sequence += 1
        heapq.heappush(self._heap, ev)
        return ev

    def cancel(self, handle: Event | None) -> bool:
        if handle is None or handle.state != Event.PENDING:
            return False
        # lazy removal: the heap entry is skipped when popped
        handle.state = Event.CANCELLED
        return True

    def run_until(self, t_end: float) -> int:
        end_tick = to_ticks(t_end)
        if end_tick < self._tick:
            raise SchedulingInPast(f"run_until({t_end}) is before clock {self.now}")
        heap = self._heap
        count = 0
        while heap and heap[0].tick <= end_tick:
            ev = heapq.heappop(heap)
            if ev.state != Event.PENDING:
                continue
            self._tick = ev.tick
            ev.state = Event.FIRED
            ev.callback(*ev.args)
            count += 1
        self._tick = end_tick
        self.fired += count
        return count


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.blake2b(label.encode(), key=struct.pack("<Q", seed & (2**64 - 1)),
                             digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RandomStream:
    """Named pseudo-random stream; output depends only on (seed, stream_id, call index)."""

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        self._rng = random.Random(_derive_seed(seed, stream_id))

    def uniform(self, lo: float, hi: float) -> float:
        return rng_uniform(self, lo, hi)

    def substream(self, label) -> "RandomStream":
        return RandomStream(self.seed, f"{self.stream_id}/{label}")


def rng_uniform(stream: RandomStream, lo: float, hi: float) -> float:
    if lo > hi:
        raise InvalidRange(f"lo={lo} > hi={hi}")
    if lo == hi:
        return lo
    value = lo + (hi - lo) * stream._rng.random()
    # float rounding can land exactly on hi
    return value if value < hi else lo


class KeyedStream:
    """Counter-free random values addressed by an explicit key.

    Unlike RandomStream the value for a key does not depend on how many other
    draws happened before it, so unrelated traffic cannot shift the draws seen
    by a given packet.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        self._key = struct.pack("<Q", _derive_seed(seed, stream_id))

    def unit(self, key) -> float:
        digest = hashlib.blake2b(repr(key).encode(), key=self._key, digest_size=8).digest()
        return (int.from_bytes(digest, "little") >> 11) / float(1 << 53)

    def uniform(self, key, lo: float, hi: float) -> float:
        if lo > hi:
            raise InvalidRange(f"lo={lo} > hi={hi}")
        return lo + (hi - lo) * self.unit(key)

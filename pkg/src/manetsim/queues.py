"""Drop-tail interface queue with a realtime band and a normal band."""

from __future__ import annotations

import enum
from collections import deque
from typing import Optional

from .packets import Packet, Priority

DEFAULT_CAPACITY = 20


class Decision(enum.Enum):
    QUEUED = "Queued"
    DROPPED_TAIL = "DroppedTail"


class InterfaceQueue:
    """Shared-capacity queue; the realtime band always drains first.

    A realtime arrival at a full queue evicts the packet at the tail of the
    normal band. Normal arrivals at a full queue are dropped.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.realtime: deque[Packet] = deque()
        self.normal: deque[Packet] = deque()

    def __len__(self):
        return len(self.realtime) + len(self.normal)

    def __iter__(self):
        yield from self.realtime
        yield from self.normal

    @property
    def full(self) -> bool:
        return len(self) >= self.capacity

    def enqueue(self, packet: Packet) -> tuple[Decision, Optional[Packet]]:
        """Returns the decision and the evicted packet, if any."""
        evicted = None
        if self.full:
            if packet.priority != Priority.REALTIME or not self.normal:
                return Decision.DROPPED_TAIL, None
            evicted = self.normal.pop()
        band = self.realtime if packet.priority == Priority.REALTIME else self.normal
        band.append(packet)
        assert len(self) <= self.capacity
        return Decision.QUEUED, evicted

    def dequeue(self) -> Optional[Packet]:
        if self.realtime:
            return self.realtime.popleft()
        if self.normal:
            return self.normal.popleft()
        return None

    def remove_if(self, predicate) -> list[Packet]:
        removed = [p for p in self if predicate(p)]
        if removed:
            self.realtime = deque(p for p in self.realtime if not predicate(p))
            self.normal = deque(p for p in self.normal if not predicate(p))
        return removed


def enqueue(queue: InterfaceQueue, packet: Packet):
    return queue.enqueue(packet)

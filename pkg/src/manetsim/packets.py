"""Unified packet frame shared by data traffic and AODV control messages."""

from __future__ import annotations

import enum
from typing import Any, Optional


class Priority(enum.IntEnum):
    REALTIME = 0
    NORMAL = 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, text: str) -> "Priority":
        return cls[text.strip().upper()]


class PacketKind(enum.Enum):
    CBR_DATA = "cbr"
    TCP_DATA = "tcp"
    TCP_ACK = "ack"
    RREQ = "rreq"
    RREP = "rrep"
    RERR = "rerr"
    HELLO = "hello"

    @property
    def is_data(self) -> bool:
        return self in DATA_KINDS

    @property
    def is_payload(self) -> bool:
        """Application payload counted by the throughput/delivery metrics."""
        return self in (PacketKind.CBR_DATA, PacketKind.TCP_DATA)


DATA_KINDS = frozenset({PacketKind.CBR_DATA, PacketKind.TCP_DATA, PacketKind.TCP_ACK})

# Traffic class of each data kind; used by the metrics whatever the protocol.
DATA_CLASS = {
    PacketKind.CBR_DATA: Priority.REALTIME,
    PacketKind.TCP_DATA: Priority.NORMAL,
    PacketKind.TCP_ACK: Priority.NORMAL,
}

BROADCAST = -1
TTL_LIMIT = 32


class Packet:
    """One frame on the wire.

    ``tclass`` is the traffic class of the generating flow and never changes;
    ``priority`` is the queueing band actually used, which under basic AODV
    is always NORMAL.
    """

    __slots__ = ("id", "kind", "flow", "priority", "tclass", "src", "dst", "size",
                 "created_at", "hops", "msg", "key", "prev_hop", "next_hop", "seq")

    def __init__(self, id: int, kind: PacketKind, src: int, dst: int, size: int,
                 created_at: float, priority: Priority = Priority.NORMAL,
                 tclass: Priority = Priority.NORMAL, flow: Optional[int] = None,
                 msg: Any = None, key: Any = None, seq: int = 0):
        if size <= 0:
            raise ValueError("packet size must be positive")
        self.id = id
        self.kind = kind
        self.flow = flow
        self.priority = priority
        self.tclass = tclass
        self.src = src
        self.dst = dst
        self.size = size
        self.created_at = created_at
        self.hops = 0
        self.msg = msg
        self.key = key if key is not None else ("pkt", id)
        self.prev_hop = src
        self.next_hop = BROADCAST
        self.seq = seq

    def __repr__(self):
        return (f"Packet(#{self.id} {self.kind.value} {self.src}->{self.dst} "
                f"{self.priority.label})")

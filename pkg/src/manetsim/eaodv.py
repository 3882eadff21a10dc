"""Realtime-priority extension to AODV.

Two mechanisms on top of the base protocol:

* route requests triggered by realtime (CBR) data bypass the busy check and
  jump the interface queue;
* when a realtime session begins, every route serving normal traffic is
  expired and new normal discoveries are held back until the session ends.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .aodv import AodvNode, RreqMessage
from .packets import DATA_CLASS, Packet, PacketKind, Priority
from .queues import InterfaceQueue


class Decision(enum.Enum):
    ACCEPT_PRIORITY = "AcceptPriority"
    ACCEPT_NORMAL = "AcceptNormal"
    REJECT_BUSY = "RejectBusy"
    FORWARD = "Forward"
    DROP_LOW_PRIORITY = "DropLowPriority"


class ExpiryScope(enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


def classify(packet: Packet) -> Priority:
    if packet.kind in DATA_CLASS:
        return DATA_CLASS[packet.kind]
    if packet.kind in (PacketKind.RREQ, PacketKind.RREP):
        return packet.tclass
    return Priority.NORMAL


def admit_rreq(msg: RreqMessage, queue: InterfaceQueue) -> Decision:
    if msg.priority == Priority.REALTIME:
        return Decision.ACCEPT_PRIORITY
    if queue.full:
        return Decision.REJECT_BUSY
    return Decision.ACCEPT_NORMAL


def forwarding_policy(packet: Packet, session_active: bool) -> Decision:
    if session_active and packet.kind.is_data and classify(packet) == Priority.NORMAL:
        return Decision.DROP_LOW_PRIORITY
    return Decision.FORWARD


def expire_normal_routes(node: AodvNode, now: float) -> int:
    count = 0
    for entry in node.table:
        if entry.usable(now) and entry.tclass == Priority.NORMAL:
            node.table.invalidate(entry)
            count += 1
    return count


@dataclass
class RealtimeSessionState:
    active: bool = False
    started_at: Optional[float] = None
    flows: set = field(default_factory=set)

    def begin(self, flow_id: int, t: float) -> bool:
        """Register a started realtime flow; True on the inactive->active edge."""
        self.flows.add(flow_id)
        if self.active:
            return False
        self.active = True
        self.started_at = t
        return True

    def end(self, flow_id: int) -> bool:
        """Unregister a finished flow; True on the active->inactive edge."""
        self.flows.discard(flow_id)
        if self.active and not self.flows:
            self.active = False
            return True
        return False


def on_realtime_start(nodes: Iterable[AodvNode], session: RealtimeSessionState,
                      flow_id: int, t: float) -> int:
    """Expire normal-class routes at every node; idempotent while active."""
    if not session.begin(flow_id, t):
        return 0
    return sum(expire_normal_routes(node, t) for node in nodes)

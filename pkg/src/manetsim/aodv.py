"""Per-node AODV state machine.

The handlers here never touch queues or the clock directly: they take the
current time, update routing state and return an action which the network
layer carries out. That keeps them unit-testable without a simulator.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .packets import Priority


class DiscoveryAlreadyPending(RuntimeError):
    pass


class RouteAlreadyValid(RuntimeError):
    pass


@dataclass
class AodvConfig:
    active_route_timeout: float = 10.0
    hello_interval: float = 1.0
    allowed_hello_loss: int = 2
    discovery_timeout: float = 1.0
    discovery_retries: int = 2
    rreq_cache_lifetime: float = 3.0
    buffer_size: int = 50


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq_num: int
    expiry: float
    valid: bool = True
    precursors: set = field(default_factory=set)
    tclass: Priority = Priority.NORMAL

    def usable(self, now: float) -> bool:
        return self.valid and self.expiry > now


@dataclass(frozen=True)
class RreqMessage:
    origin: int
    origin_seq: int
    broadcast_id: int
    destination: int
    dest_seq_known: int
    hop_count: int = 0
    priority: Priority = Priority.NORMAL


@dataclass(frozen=True)
class RrepMessage:
    origin: int
    destination: int
    dest_seq: int
    hop_count: int
    lifetime: float
    priority: Priority = Priority.NORMAL
    # identifies the discovery attempt being answered
    request: tuple = ()


@dataclass(frozen=True)
class RerrMessage:
    unreachable: tuple

    def __post_init__(self):
        if not self.unreachable:
            raise ValueError("RERR must list at least one destination")


@dataclass(frozen=True)
class HelloMessage:
    origin: int
    seq: int


# -- actions ---------------------------------------------------------------

@dataclass(frozen=True)
class Reply:
    rrep: RrepMessage
    next_hop: int


@dataclass(frozen=True)
class Rebroadcast:
    rreq: RreqMessage


@dataclass(frozen=True)
class Discard:
    reason: str


@dataclass(frozen=True)
class Forward:
    rrep: RrepMessage
    next_hop: int


@dataclass(frozen=True)
class Consume:
    rrep: RrepMessage


@dataclass(frozen=True)
class Drop:
    reason: str


@dataclass(frozen=True)
class ErrorReport:
    rerr: RerrMessage
    recipients: tuple
    invalidated: tuple


RreqAction = Union[Reply, Rebroadcast, Discard]
RrepAction = Union[Forward, Consume, Drop]


@dataclass
class Discovery:
    destination: int
    priority: Priority
    started_at: float
    attempts: int = 1
    broadcast_id: int = 0
    timer: object = None


class RouteTable:
    """Destination-indexed routes with the AODV freshness rule.

    An offered route replaces the current one if it has a higher sequence
    number, or the same sequence number and fewer hops. Against an invalid
    entry, any route at least as fresh is accepted. Sequence numbers for a
    destination therefore never decrease; ``violations`` would record it if
    they did.
    """

    def __init__(self, owner: int):
        self.owner = owner
        self.entries: dict[int, RouteEntry] = {}
        self.violations: list[tuple] = []

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.values())

    def get(self, dest: int) -> Optional[RouteEntry]:
        return self.entries.get(dest)

    def _set_seq(self, entry: RouteEntry, seq: int):
        if seq < entry.dest_seq_num:
            self.violations.append((self.owner, entry.destination, entry.dest_seq_num, seq))
        entry.dest_seq_num = seq

    def invalidate(self, entry: RouteEntry, seq: Optional[int] = None):
        if not entry.valid:
            return
        entry.valid = False
        self._set_seq(entry, max(entry.dest_seq_num + 1, seq or 0))

    def lookup(self, dest: int, now: float) -> Optional[RouteEntry]:
        entry = self.entries.get(dest)
        if entry is None:
            return None
        if entry.valid and entry.expiry <= now:
            self.invalidate(entry)
        return entry if entry.valid else None

    def offer(self, dest: int, next_hop: int, hop_count: int, seq: int, expiry: float,
              now: float, tclass: Priority = Priority.NORMAL) -> bool:
        entry = self.entries.get(dest)
        if entry is None:
            self.entries[dest] = RouteEntry(dest, next_hop, hop_count, seq, expiry,
                                            tclass=tclass)
            return True
        usable = self.lookup(dest, now) is not None
        if usable:
            fresher = seq > entry.dest_seq_num or (
                seq == entry.dest_seq_num and hop_count < entry.hop_count)
            if not fresher:
                if next_hop == entry.next_hop and hop_count == entry.hop_count \
                        and seq == entry.dest_seq_num:
                    entry.expiry = max(entry.expiry, expiry)
                return False
        elif seq < entry.dest_seq_num:
            return False
        if not usable:
            entry.tclass = tclass
            entry.expiry = expiry
        else:
            entry.expiry = max(entry.expiry, expiry)
            if tclass == Priority.REALTIME:
                entry.tclass = tclass
        entry.next_hop = next_hop
        entry.hop_count = hop_count
        self._set_seq(entry, seq)
        entry.valid = True
        return True

    def install_reverse(self, dest: int, next_hop: int, hop_count: int, seq: int,
                        expiry: float, now: float,
                        tclass: Priority = Priority.NORMAL) -> RouteEntry:
        """Route back to the originator of a fresh RREQ.

        Always points at the neighbour the request came from; the sequence
        number is the larger of the stored and the advertised one, so a
        number bumped by an earlier invalidation cannot block the request.
        """
        entry = self.entries.get(dest)
        if entry is None:
            entry = self.entries[dest] = RouteEntry(dest, next_hop, hop_count, seq, expiry,
                                                    tclass=tclass)
            return entry
        if self.lookup(dest, now) is not None:
            entry.expiry = max(entry.expiry, expiry)
            if tclass == Priority.REALTIME:
                entry.tclass = tclass
        else:
            entry.expiry = expiry
            entry.tclass = tclass
        entry.next_hop = next_hop
        entry.hop_count = hop_count
        self._set_seq(entry, max(entry.dest_seq_num, seq))
        entry.valid = True
        return entry

    def usable_routes(self, now: float) -> list[RouteEntry]:
        return [e for e in self.entries.values() if e.usable(now)]


class AodvNode:
    def __init__(self, node_id: int, config: AodvConfig | None = None):
        self.id = node_id
        self.config = config or AodvConfig()
        self.seq_num = 0
        self.broadcast_id = 0
        self.table = RouteTable(node_id)
        self.seen: dict[tuple, float] = {}
        self.pending: dict[int, Discovery] = {}
        self.last_heard: dict[int, float] = {}
        self.counters: Counter = Counter()
        self.rebroadcast_log: set = set()

    # -- lookups -----------------------------------------------------------

    def route_lookup(self, dest: int, now: float, refresh: bool = True) -> Optional[RouteEntry]:
        entry = self.table.lookup(dest, now)
        if entry is not None and refresh:
            entry.expiry = max(entry.expiry, now + self.config.active_route_timeout)
        return entry

    def refresh(self, dest: int, now: float):
        self.route_lookup(dest, now, refresh=True)

    def has_active_route(self, now: float) -> bool:
        return any(e.usable(now) for e in self.table)

    def note_heard(self, neighbor: int, now: float):
        self.last_heard[neighbor] = now

    def _neighbor_route(self, neighbor: int, now: float):
        entry = self.table.get(neighbor)
        seq = entry.dest_seq_num if entry is not None else 0
        self.table.offer(neighbor, neighbor, 1, seq, now + self.config.active_route_timeout, now,
                         tclass=entry.tclass if entry is not None else Priority.NORMAL)

    # -- discovery ---------------------------------------------------------

    def _new_rreq(self, dest: int, priority: Priority, now: float) -> RreqMessage:
        self.seq_num += 1
        self.broadcast_id += 1
        self.seen[(self.id, self.broadcast_id)] = now + self.config.rreq_cache_lifetime
        entry = self.table.get(dest)
        return RreqMessage(origin=self.id, origin_seq=self.seq_num,
                           broadcast_id=self.broadcast_id, destination=dest,
                           dest_seq_known=entry.dest_seq_num if entry is not None else 0,
                           hop_count=0, priority=priority)

    def initiate_route_discovery(self, dest: int, priority: Priority, now: float) -> RreqMessage:
        if dest in self.pending:
            raise DiscoveryAlreadyPending(f"node {self.id} already discovering {dest}")
        if self.table.lookup(dest, now) is not None:
            raise RouteAlreadyValid(f"node {self.id} has a valid route to {dest}")
        rreq = self._new_rreq(dest, priority, now)
        self.pending[dest] = Discovery(dest, priority, now, broadcast_id=rreq.broadcast_id)
        return rreq

    def retry_discovery(self, dest: int, now: float) -> Optional[RreqMessage]:
        """Next attempt after a timeout, or None once retries are used up."""
        disc = self.pending.get(dest)
        if disc is None:
            return None
        if disc.attempts > self.config.discovery_retries:
            del self.pending[dest]
            self.counters["discovery_failed"] += 1
            return None
        disc.attempts += 1
        rreq = self._new_rreq(dest, disc.priority, now)
        disc.broadcast_id = rreq.broadcast_id
        return rreq

    def abandon_discovery(self, dest: int) -> Optional[Discovery]:
        return self.pending.pop(dest, None)

    def handle_rreq(self, msg: RreqMessage, sender: int, now: float) -> RreqAction:
        cfg = self.config
        self.note_heard(sender, now)
        if msg.origin == self.id:
            return Discard("own")
        if sender != msg.origin:
            self._neighbor_route(sender, now)
        key = (msg.origin, msg.broadcast_id)
        expiry = self.seen.get(key)
        if (expiry is not None and expiry > now) or key in self.rebroadcast_log:
            self.counters["rreq_duplicate"] += 1
            return Discard("duplicate")
        self.seen[key] = now + cfg.rreq_cache_lifetime

        reverse = self.table.install_reverse(msg.origin, sender, msg.hop_count + 1,
                                             msg.origin_seq, now + cfg.active_route_timeout,
                                             now, tclass=msg.priority)
        request = (msg.origin, msg.broadcast_id)

        if msg.destination == self.id:
            self.seq_num = max(self.seq_num, msg.dest_seq_known)
            rrep = RrepMessage(origin=msg.origin, destination=self.id, dest_seq=self.seq_num,
                               hop_count=0, lifetime=cfg.active_route_timeout,
                               priority=msg.priority, request=request)
            return Reply(rrep, reverse.next_hop)

        route = self.table.lookup(msg.destination, now)
        if route is not None and route.dest_seq_num >= msg.dest_seq_known:
            route.precursors.add(reverse.next_hop)
            reverse.precursors.add(route.next_hop)
            rrep = RrepMessage(origin=msg.origin, destination=msg.destination,
                               dest_seq=route.dest_seq_num, hop_count=route.hop_count,
                               lifetime=route.expiry - now, priority=msg.priority,
                               request=request)
            return Reply(rrep, reverse.next_hop)

        self.rebroadcast_log.add(key)
        # carry the freshest number known here, so the reply is accepted on the way back
        known = msg.dest_seq_known
        entry = self.table.get(msg.destination)
        if entry is not None:
            known = max(known, entry.dest_seq_num)
        return Rebroadcast(replace(msg, hop_count=msg.hop_count + 1, dest_seq_known=known))

    def handle_rrep(self, msg: RrepMessage, sender: int, now: float) -> RrepAction:
        cfg = self.config
        self.note_heard(sender, now)
        if sender != msg.destination:
            self._neighbor_route(sender, now)
        if not self.table.offer(msg.destination, sender, msg.hop_count + 1, msg.dest_seq,
                                now + cfg.active_route_timeout, now, tclass=msg.priority):
            self.counters["rrep_not_installed"] += 1
        if msg.origin == self.id:
            return Consume(msg)
        reverse = self.table.lookup(msg.origin, now)
        if reverse is None:
            self.counters["no_reverse_route"] += 1
            return Drop("no_reverse_route")
        reverse.expiry = max(reverse.expiry, now + cfg.active_route_timeout)
        forward = self.table.lookup(msg.destination, now)
        if forward is not None:
            forward.precursors.add(reverse.next_hop)
            reverse.precursors.add(forward.next_hop)
        return Forward(replace(msg, hop_count=msg.hop_count + 1), reverse.next_hop)

    def complete_discovery(self, dest: int) -> Optional[Discovery]:
        return self.pending.pop(dest, None)

    # -- maintenance -------------------------------------------------------

    def _invalidate_via(self, neighbor: int, now: float, only=None) -> tuple[list, set]:
        unreachable, recipients = [], set()
        for entry in sorted(self.table, key=lambda e: e.destination):
            if not entry.usable(now) or entry.next_hop != neighbor:
                continue
            if only is not None and entry.destination not in only:
                continue
            seq = only.get(entry.destination) if only is not None else None
            self.table.invalidate(entry, seq)
            unreachable.append((entry.destination, entry.dest_seq_num))
            recipients |= entry.precursors
        recipients.discard(self.id)
        return unreachable, recipients

    def handle_link_break(self, lost_neighbor: int, now: float) -> Optional[ErrorReport]:
        self.last_heard.pop(lost_neighbor, None)
        unreachable, recipients = self._invalidate_via(lost_neighbor, now)
        if not unreachable:
            return None
        recipients.discard(lost_neighbor)
        if not recipients:
            return ErrorReport(RerrMessage(tuple(unreachable)), (), tuple(unreachable))
        return ErrorReport(RerrMessage(tuple(unreachable)), tuple(sorted(recipients)),
                           tuple(unreachable))

    def handle_rerr(self, msg: RerrMessage, sender: int, now: float) -> Optional[ErrorReport]:
        self.note_heard(sender, now)
        unreachable, recipients = self._invalidate_via(sender, now, only=dict(msg.unreachable))
        if not unreachable:
            return None
        recipients.discard(sender)
        return ErrorReport(RerrMessage(tuple(unreachable)), tuple(sorted(recipients)),
                           tuple(unreachable))

    def no_route_error(self, dest: int) -> RerrMessage:
        """RERR for a data packet that arrived with no route to forward it."""
        entry = self.table.get(dest)
        seq = entry.dest_seq_num if entry is not None else 0
        return RerrMessage(((dest, seq),))

    def hello_tick(self, now: float) -> Optional[HelloMessage]:
        if not self.has_active_route(now):
            return None
        return HelloMessage(self.id, self.seq_num)

    def handle_hello(self, msg: HelloMessage, sender: int, now: float):
        self.note_heard(sender, now)

    def stale_neighbors(self, now: float) -> list[int]:
        limit = self.config.allowed_hello_loss * self.config.hello_interval
        hops = {e.next_hop for e in self.table if e.usable(now)}
        return sorted(n for n in hops if now - self.last_heard.get(n, -math.inf) > limit)

    def purge_seen(self, now: float):
        self.seen = {k: v for k, v in self.seen.items() if v > now}

"""Network-level simulation: nodes, interface queues, abstract MAC, flows and tracing.

The MAC is an idealised broadcast medium. A node transmits one packet at a
time; each transmission occupies the interface for ``hop_latency`` plus a
uniform jitter and is then delivered to every node in range (broadcast) or
to the next hop if it is still in range (unicast). No collisions.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Optional

from . import eaodv
from .aodv import (AodvNode, Consume, Discard, Drop, ErrorReport, Forward, HelloMessage,
                   Rebroadcast, Reply, RerrMessage, RreqMessage, RrepMessage)
from .engine import EventKind, KeyedStream, Simulator
from .metrics import MetricsAccumulator, format_record
from .mobility import RandomWaypoint
from .packets import BROADCAST, DATA_CLASS, TTL_LIMIT, Packet, PacketKind, Priority
from .queues import Decision, InterfaceQueue
from .scenario import Protocol, Scenario
from .traffic import CbrSource, FlowKind, FlowSpec, TcpEvent, TcpSink, TcpSource

log = logging.getLogger(__name__)

CONTROL_SIZE = {PacketKind.RREQ: 48, PacketKind.RREP: 44, PacketKind.RERR: 32,
                PacketKind.HELLO: 44}


class ConservationViolation(AssertionError):
    pass


@dataclass
class DiscoveryRecord:
    node: int
    destination: int
    priority: Priority
    started_at: float
    tclass: Priority = Priority.NORMAL
    completed_at: Optional[float] = None
    attempts: int = 1
    failed: bool = False


@dataclass
class Node:
    id: int
    aodv: AodvNode
    ifq: InterfaceQueue
    busy: bool = False
    in_tx: Optional[Packet] = None
    buffers: dict = field(default_factory=dict)
    deferred: set = field(default_factory=set)
    realtime_seen: bool = False
    tcp_sources: list = field(default_factory=list)


class Network:
    def __init__(self, scenario: Scenario):
        self.scenario = sc = scenario
        self.eaodv = sc.protocol == Protocol.EAODV
        self.sim = Simulator()
        self.mobility = RandomWaypoint(sc.node_count, sc.mobility, sc.seed, sc.positions)
        self.jitter = KeyedStream(sc.seed, "jitter")
        self.nodes = [Node(i, AodvNode(i, sc.aodv), InterfaceQueue(sc.queue_capacity))
                      for i in range(sc.node_count)]
        self.session = eaodv.RealtimeSessionState()
        self.trace: list[str] = []
        self.metrics = MetricsAccumulator(sc.sim_time, sc.metrics_interval)
        self.discoveries: list[DiscoveryRecord] = []
        self.rrep_arrivals: list[tuple[float, int, int]] = []
        self.route_expiries: list[tuple[float, int]] = []
        self.counters: Counter = Counter()
        self.audit_violations: list[tuple] = []
        self.audit_checks = 0
        self._next_id = 0
        self._open_discovery: dict[tuple[int, int], DiscoveryRecord] = {}
        self.sinks: dict[int, TcpSink] = {}
        self.sources: dict[int, object] = {}
        self._setup_flows()
        self._setup_timers()

    # -- construction ------------------------------------------------------

    def new_packet(self, kind: PacketKind, src: int, dst: int, size: int, flow=None, seq=0,
                   tclass: Priority = Priority.NORMAL, key=None, msg=None,
                   priority: Optional[Priority] = None) -> Packet:
        if priority is None:
            priority = tclass if self.eaodv else Priority.NORMAL
        pkt = Packet(self._next_id, kind, src, dst, size, self.sim.now, priority=priority,
                     tclass=tclass, flow=flow, msg=msg, key=key, seq=seq)
        self._next_id += 1
        return pkt

    def _setup_flows(self):
        sc = self.scenario
        for flow in sc.flows:
            if flow.stop_time is None or flow.stop_time > sc.sim_time:
                flow = FlowSpec(flow.id, flow.source, flow.destination, flow.kind,
                                flow.start_time, sc.sim_time, flow.packet_size, flow.rate)
            src = self.nodes[flow.source]
            if flow.kind == FlowKind.CBR:
                agent = CbrSource(flow, self.new_packet)
                self.sources[flow.id] = agent
                self.sim.schedule(flow.start_time, self._flow_start, flow,
                                  kind=EventKind.FLOW_START)
            else:
                agent = TcpSource(flow, self.sim, self.new_packet,
                                  lambda p, node=src: self.originate(node, p), sc.tcp)
                self.sources[flow.id] = agent
                src.tcp_sources.append(agent)
                self.sinks[flow.id] = TcpSink(flow, self.new_packet)
                self.sim.schedule(flow.start_time, self._flow_start, flow,
                                  kind=EventKind.FLOW_START)

    def _setup_timers(self):
        sc = self.scenario
        n = sc.node_count
        interval = sc.aodv.hello_interval
        for node in self.nodes:
            self.sim.schedule(interval * (node.id + 1) / (n + 1), self._hello_tick, node)
        for t, node_id in self.mobility.arrivals(sc.sim_time):
            self.sim.schedule(t, self._waypoint, node_id, kind=EventKind.MOBILITY_UPDATE)
        if sc.audit_interval > 0:
            self.sim.schedule(0.0, self._audit)

    # -- tracing -----------------------------------------------------------

    def _record(self, action: str, node: int, pkt: Packet, reason: str = "-"):
        t = self.sim.now
        kind = pkt.kind.value
        self.trace.append(format_record(action, t, node, kind, pkt.id, pkt.size, pkt.src,
                                        pkt.dst, reason))
        if pkt.kind in DATA_CLASS:
            self.metrics.record(action, t, node, kind, pkt.id, pkt.size, pkt.src, pkt.dst,
                                reason)

    def drop(self, node: Node, pkt: Packet, reason: str):
        self._record("d", node.id, pkt, reason)
        self.counters[f"drop_{pkt.kind.value}_{pkt.tclass.label}_{reason}"] += 1

    # -- EAODV hooks ---------------------------------------------------------

    def session_active(self, node: Node) -> bool:
        if not self.eaodv or not self.session.active:
            return False
        if self.scenario.expiry_scope == eaodv.ExpiryScope.LOCAL:
            return node.realtime_seen
        return True

    def _defer_normal_discoveries(self, node: Node):
        for dest, disc in list(node.aodv.pending.items()):
            if disc.priority == Priority.NORMAL:
                self.sim.cancel(disc.timer)
                node.aodv.abandon_discovery(dest)
                self._open_discovery.pop((node.id, dest), None)
                node.deferred.add(dest)

    def _expire_local(self, node: Node):
        if node.realtime_seen or not self.session.active:
            return
        node.realtime_seen = True
        n = eaodv.expire_normal_routes(node.aodv, self.sim.now)
        self.route_expiries.append((self.sim.now, n))
        self._defer_normal_discoveries(node)

    def _saw_packet(self, node: Node, pkt: Packet):
        if (self.eaodv and self.scenario.expiry_scope == eaodv.ExpiryScope.LOCAL
                and pkt.priority == Priority.REALTIME):
            self._expire_local(node)

    def _flow_start(self, flow: FlowSpec):
        agent = self.sources[flow.id]
        if flow.kind == FlowKind.CBR:
            if self.eaodv:
                self._realtime_start(flow)
            self._cbr_emit(agent, 0)
        else:
            agent.step(TcpEvent.START)

    def _realtime_start(self, flow: FlowSpec):
        now = self.sim.now
        if self.scenario.expiry_scope == eaodv.ExpiryScope.GLOBAL:
            was_active = self.session.active
            n = eaodv.on_realtime_start((nd.aodv for nd in self.nodes), self.session,
                                        flow.id, now)
            if not was_active:
                self.route_expiries.append((now, n))
                for node in self.nodes:
                    self._defer_normal_discoveries(node)
        else:
            self.session.begin(flow.id, now)
        if flow.stop_time is not None and flow.stop_time < self.scenario.sim_time:
            self.sim.schedule(flow.stop_time, self._realtime_stop, flow)

    def _realtime_stop(self, flow: FlowSpec):
        if not self.session.end(flow.id):
            return
        for node in self.nodes:
            node.realtime_seen = False
            for dest in sorted(node.deferred):
                if node.buffers.get(dest):
                    self.ensure_discovery(node, dest, Priority.NORMAL)
            node.deferred.clear()
            for src in node.tcp_sources:
                src.step(TcpEvent.ROUTE_AVAILABLE)

    # -- traffic -------------------------------------------------------------

    def _cbr_emit(self, agent: CbrSource, k: int):
        pkt = agent.tick(self.sim.now)
        if pkt is None:
            return
        self.originate(self.nodes[agent.flow.source], pkt)
        t_next = agent.emission_time(k + 1)
        if agent.flow.active_at(t_next):
            self.sim.schedule(t_next, self._cbr_emit, agent, k + 1)

    def originate(self, node: Node, pkt: Packet):
        self._record("s", node.id, pkt)
        self._saw_packet(node, pkt)
        self.route_data(node, pkt)

    def route_data(self, node: Node, pkt: Packet):
        now = self.sim.now
        entry = node.aodv.route_lookup(pkt.dst, now)
        if entry is not None:
            if pkt.tclass == Priority.REALTIME and self.eaodv:
                entry.tclass = Priority.REALTIME
            node.aodv.refresh(entry.next_hop, now)
            pkt.next_hop = entry.next_hop
            if node.id != pkt.src:
                self._record("f", node.id, pkt)
            self.enqueue(node, pkt)
        elif node.id == pkt.src:
            self._buffer(node, pkt)
            self.ensure_discovery(node, pkt.dst, pkt.tclass)
        else:
            self.drop(node, pkt, "noroute")
            self.send_rerr(node, node.aodv.no_route_error(pkt.dst), (pkt.prev_hop,))

    def _buffer(self, node: Node, pkt: Packet):
        buf = node.buffers.setdefault(pkt.dst, deque())
        if len(buf) >= self.scenario.aodv.buffer_size:
            self.drop(node, buf.popleft(), "queue")
        buf.append(pkt)

    def _flush(self, node: Node, dest: int):
        buf = node.buffers.pop(dest, None)
        while buf:
            pkt = buf.popleft()
            if node.aodv.route_lookup(dest, self.sim.now, refresh=False) is None:
                buf.appendleft(pkt)
                node.buffers[dest] = buf
                return
            self.route_data(node, pkt)

    # -- route discovery ---------------------------------------------------

    def ensure_discovery(self, node: Node, dest: int, tclass: Priority):
        now = self.sim.now
        if dest in node.aodv.pending:
            return
        if node.aodv.route_lookup(dest, now, refresh=False) is not None:
            return
        if tclass == Priority.NORMAL and self.session_active(node):
            node.deferred.add(dest)
            return
        priority = tclass if self.eaodv else Priority.NORMAL
        rreq = node.aodv.initiate_route_discovery(dest, priority, now)
        rec = DiscoveryRecord(node.id, dest, priority, now, tclass)
        self.discoveries.append(rec)
        self._open_discovery[(node.id, dest)] = rec
        node.aodv.pending[dest].timer = self.sim.schedule_in(
            self.scenario.aodv.discovery_timeout, self._discovery_timeout, node, dest)
        self._send_rreq(node, rreq, tclass)

    def _send_rreq(self, node: Node, rreq: RreqMessage, tclass: Priority):
        pkt = self.new_packet(PacketKind.RREQ, node.id, rreq.destination,
                              CONTROL_SIZE[PacketKind.RREQ], tclass=tclass, msg=rreq,
                              priority=rreq.priority,
                              key=("rreq", rreq.origin, rreq.broadcast_id))
        self._record("s", node.id, pkt)
        self.enqueue(node, pkt)

    def _discovery_timeout(self, node: Node, dest: int):
        rec = self._open_discovery.get((node.id, dest))
        tclass = rec.tclass if rec is not None else Priority.NORMAL
        rreq = node.aodv.retry_discovery(dest, self.sim.now)
        if rreq is None:
            if rec is not None:
                rec.failed = True
                del self._open_discovery[(node.id, dest)]
            for pkt in node.buffers.pop(dest, ()):
                self.drop(node, pkt, "noroute")
            return
        if rec is not None:
            rec.attempts += 1
        node.aodv.pending[dest].timer = self.sim.schedule_in(
            self.scenario.aodv.discovery_timeout, self._discovery_timeout, node, dest)
        self._send_rreq(node, rreq, tclass)

    def _route_ready(self, node: Node, dest: int):
        now = self.sim.now
        disc = node.aodv.complete_discovery(dest)
        if disc is not None:
            self.sim.cancel(disc.timer)
        rec = self._open_discovery.pop((node.id, dest), None)
        if rec is not None:
            rec.completed_at = now
        self._flush(node, dest)
        for src in node.tcp_sources:
            if src.flow.destination == dest:
                src.step(TcpEvent.ROUTE_AVAILABLE)

    def _wanted(self, node: Node, dests) -> list[tuple[int, Priority]]:
        now = self.sim.now
        out = []
        for flow in self.scenario.flows:
            if flow.source == node.id and flow.destination in dests and flow.active_at(now):
                out.append((flow.destination, flow.priority))
        return out

    def _rediscover(self, node: Node, report: Optional[ErrorReport]):
        if report is None:
            return
        dests = {d for d, _ in report.invalidated}
        for dest, tclass in self._wanted(node, dests):
            self.ensure_discovery(node, dest, tclass)

    # -- transmission ------------------------------------------------------

    def enqueue(self, node: Node, pkt: Packet):
        decision, evicted = node.ifq.enqueue(pkt)
        if decision == Decision.DROPPED_TAIL:
            self.drop(node, pkt, "queue")
        if evicted is not None:
            self.drop(node, evicted, "queue")
        if not node.busy:
            self._transmit_next(node)

    def _transmit_next(self, node: Node):
        pkt = node.ifq.dequeue()
        if pkt is None:
            return
        now = self.sim.now
        node.busy = True
        node.in_tx = pkt
        if pkt.next_hop == BROADCAST:
            receivers = sorted(self.mobility.neighbors(node.id, now))
        elif self.mobility.in_range(node.id, pkt.next_hop, now):
            receivers = [pkt.next_hop]
        else:
            receivers = []
        delay = self.scenario.hop_latency
        if self.scenario.jitter > 0:
            delay += self.jitter.uniform((pkt.key, node.id), 0.0, self.scenario.jitter)
        self.sim.schedule_in(delay, self._transmit_done, node, pkt, receivers,
                             kind=EventKind.PACKET_DELIVERY)

    def _transmit_done(self, node: Node, pkt: Packet, receivers: list):
        node.busy = False
        node.in_tx = None
        if pkt.next_hop != BROADCAST and not receivers:
            self._link_failure(node, pkt)
        else:
            for r in receivers:
                self.receive(self.nodes[r], pkt, node.id)
        if not node.busy:
            self._transmit_next(node)

    def _link_failure(self, node: Node, pkt: Packet):
        # the next hop moved out of range; without link-layer feedback the
        # break is only noticed once its HELLOs stop arriving
        self.drop(node, pkt, "noroute")
        self.counters["link_failures"] += 1
        if self.scenario.link_feedback:
            self.link_break(node, pkt.next_hop)

    def link_break(self, node: Node, lost: int):
        report = node.aodv.handle_link_break(lost, self.sim.now)
        if report is None:
            return
        if report.recipients:
            self.send_rerr(node, report.rerr, report.recipients)
        self._rediscover(node, report)

    def _unicast_control(self, node: Node, kind: PacketKind, msg, dst: int, next_hop: int,
                         tclass=Priority.NORMAL, priority=None, key=None, pkt_id=None,
                         action="s"):
        pkt = self.new_packet(kind, node.id, dst, CONTROL_SIZE[kind], tclass=tclass, msg=msg,
                              priority=priority, key=key)
        pkt.next_hop = next_hop
        self._record(action, node.id, pkt)
        self.enqueue(node, pkt)
        return pkt

    def send_rerr(self, node: Node, rerr: RerrMessage, recipients):
        for r in recipients:
            if r == node.id:
                continue
            self._unicast_control(node, PacketKind.RERR, rerr, r, r,
                                  key=("rerr", node.id, self.sim.now_ticks, r))

    # -- reception ---------------------------------------------------------

    def receive(self, node: Node, pkt: Packet, sender: int):
        kind = pkt.kind
        if kind in DATA_CLASS:
            self._receive_data(node, pkt, sender)
        elif kind == PacketKind.RREQ:
            self._receive_rreq(node, pkt, sender)
        elif kind == PacketKind.RREP:
            self._receive_rrep(node, pkt, sender)
        elif kind == PacketKind.RERR:
            self._record("r", node.id, pkt)
            report = node.aodv.handle_rerr(pkt.msg, sender, self.sim.now)
            if report is not None:
                if report.recipients:
                    self.send_rerr(node, report.rerr, report.recipients)
                self._rediscover(node, report)
        elif kind == PacketKind.HELLO:
            self._record("r", node.id, pkt)
            node.aodv.handle_hello(pkt.msg, sender, self.sim.now)
        else:
            self.counters["malformed"] += 1

    def _receive_data(self, node: Node, pkt: Packet, sender: int):
        now = self.sim.now
        self._saw_packet(node, pkt)
        if eaodv.forwarding_policy(pkt, self.session_active(node)) == \
                eaodv.Decision.DROP_LOW_PRIORITY:
            self.drop(node, pkt, "priority")
            return
        self._record("r", node.id, pkt)
        aodv = node.aodv
        aodv.note_heard(sender, now)
        aodv.refresh(sender, now)
        aodv.refresh(pkt.src, now)
        pkt.hops += 1
        pkt.prev_hop = sender
        if node.id == pkt.dst:
            self._deliver(node, pkt)
        elif pkt.hops >= TTL_LIMIT:
            self.drop(node, pkt, "ttl")
        else:
            self.route_data(node, pkt)

    def _deliver(self, node: Node, pkt: Packet):
        if pkt.kind == PacketKind.TCP_DATA:
            ack = self.sinks[pkt.flow].on_data(pkt)
            self.originate(node, ack)
        elif pkt.kind == PacketKind.TCP_ACK:
            self.sources[pkt.flow].step(TcpEvent.ACK, pkt.seq)

    def _receive_rreq(self, node: Node, pkt: Packet, sender: int):
        msg: RreqMessage = pkt.msg
        now = self.sim.now
        if eaodv.admit_rreq(msg, node.ifq) == eaodv.Decision.REJECT_BUSY:
            self.drop(node, pkt, "queue")
            return
        self._saw_packet(node, pkt)
        self._record("r", node.id, pkt)
        action = node.aodv.handle_rreq(msg, sender, now)
        if isinstance(action, Reply):
            self._unicast_control(node, PacketKind.RREP, action.rrep, action.rrep.origin,
                                  action.next_hop, tclass=pkt.tclass, priority=msg.priority,
                                  key=("rrep", msg.origin, msg.broadcast_id, node.id))
        elif isinstance(action, Rebroadcast):
            fwd = Packet(pkt.id, pkt.kind, pkt.src, pkt.dst, pkt.size, pkt.created_at,
                         priority=pkt.priority, tclass=pkt.tclass, msg=action.rreq, key=pkt.key)
            fwd.hops = pkt.hops + 1
            self._record("f", node.id, fwd)
            self.enqueue(node, fwd)
        else:
            self.counters[f"rreq_discard_{action.reason}"] += 1

    def _receive_rrep(self, node: Node, pkt: Packet, sender: int):
        msg: RrepMessage = pkt.msg
        now = self.sim.now
        self._saw_packet(node, pkt)
        self._record("r", node.id, pkt)
        action = node.aodv.handle_rrep(msg, sender, now)
        if isinstance(action, Consume):
            self.rrep_arrivals.append((now, node.id, msg.destination))
            if node.aodv.route_lookup(msg.destination, now, refresh=False) is not None:
                self._route_ready(node, msg.destination)
        elif isinstance(action, Forward):
            fwd = Packet(pkt.id, pkt.kind, pkt.src, pkt.dst, pkt.size, pkt.created_at,
                         priority=pkt.priority, tclass=pkt.tclass, msg=action.rrep, key=pkt.key)
            fwd.next_hop = action.next_hop
            fwd.hops = pkt.hops + 1
            self._record("f", node.id, fwd)
            self.enqueue(node, fwd)
        else:
            self.drop(node, pkt, "noroute")

    # -- periodic ----------------------------------------------------------

    def _hello_tick(self, node: Node):
        now = self.sim.now
        aodv = node.aodv
        msg = aodv.hello_tick(now)
        if msg is not None:
            pkt = self.new_packet(PacketKind.HELLO, node.id, BROADCAST,
                                  CONTROL_SIZE[PacketKind.HELLO], msg=msg,
                                  key=("hello", node.id, self.sim.now_ticks))
            self._record("s", node.id, pkt)
            self.enqueue(node, pkt)
        for lost in aodv.stale_neighbors(now):
            self.link_break(node, lost)
        aodv.purge_seen(now)
        self.sim.schedule_in(self.scenario.aodv.hello_interval, self._hello_tick, node)

    def _waypoint(self, node_id: int):
        self.counters["waypoints"] += 1

    def _audit(self):
        now = self.sim.now
        self.audit_checks += 1
        for cycle in route_cycles(self, now):
            self.audit_violations.append(("cycle", now, cycle))
        self.sim.schedule_in(self.scenario.audit_interval, self._audit)

    # -- results -------------------------------------------------------------

    def in_flight(self) -> Counter:
        """Data packets still held anywhere in the network, per traffic class."""
        out = Counter()
        for node in self.nodes:
            held = list(node.ifq)
            if node.in_tx is not None:
                held.append(node.in_tx)
            for buf in node.buffers.values():
                held.extend(buf)
            for pkt in held:
                if pkt.kind in DATA_CLASS:
                    out[DATA_CLASS[pkt.kind]] += 1
        return out

    def run(self) -> int:
        return self.sim.run_until(self.scenario.sim_time)

    def seq_violations(self) -> list:
        return [v for node in self.nodes for v in node.aodv.table.violations]

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        for line in self.trace:
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def route_latency(self, flow: FlowSpec) -> Optional[float]:
        """Seconds from flow start until the source first consumed an RREP for the destination."""
        for t, node, dest in self.rrep_arrivals:
            if node == flow.source and dest == flow.destination and t >= flow.start_time:
                return t - flow.start_time
        return None


def route_cycles(net: Network, now: float) -> list[tuple]:
    """Next-hop cycles among usable routes, one per (destination, cycle)."""
    cycles = []
    n = len(net.nodes)
    for dest in range(n):
        nxt = {}
        for node in net.nodes:
            entry = node.aodv.table.get(dest)
            if node.id != dest and entry is not None and entry.usable(now):
                nxt[node.id] = entry.next_hop
        seen_global = set()
        for start in nxt:
            if start in seen_global:
                continue
            path, pos = [], {}
            cur = start
            while cur in nxt and cur not in pos and cur not in seen_global:
                pos[cur] = len(path)
                path.append(cur)
                cur = nxt[cur]
            if cur in pos:
                cycles.append((dest, tuple(path[pos[cur]:])))
            seen_global.update(path)
    return cycles

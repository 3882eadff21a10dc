"""Traffic generators: constant-rate UDP and a stop-and-wait reliable flow."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

from .engine import Simulator, to_ticks, US_PER_S
from .packets import Packet, PacketKind, Priority

ACK_SIZE = 40


class FlowKind(enum.Enum):
    TCP = "tcp"
    CBR = "cbr"

    @classmethod
    def parse(cls, text: str) -> "FlowKind":
        text = text.strip().lower()
        aliases = {"tcp": cls.TCP, "tcplike": cls.TCP, "cbr": cls.CBR, "cbrudp": cls.CBR,
                   "udp": cls.CBR}
        if text not in aliases:
            raise ValueError(f"unknown flow kind {text!r}")
        return aliases[text]


@dataclass
class FlowSpec:
    id: int
    source: int
    destination: int
    kind: FlowKind
    start_time: float
    stop_time: Optional[float] = None
    packet_size: int = 512
    rate: float = 4.0

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError(f"flow {self.id}: source equals destination")
        if self.start_time < 0:
            raise ValueError(f"flow {self.id}: negative start time")

    @property
    def priority(self) -> Priority:
        return Priority.REALTIME if self.kind == FlowKind.CBR else Priority.NORMAL

    def active_at(self, t: float) -> bool:
        return t >= self.start_time and (self.stop_time is None or t < self.stop_time)


PacketFactory = Callable[..., Packet]


class CbrSource:
    """Emits one packet every 1/rate seconds from the flow start; no acks."""

    def __init__(self, flow: FlowSpec, new_packet: PacketFactory):
        if flow.kind != FlowKind.CBR:
            raise ValueError("CbrSource needs a CBR flow")
        self.flow = flow
        self.new_packet = new_packet
        self.seq = 0

    def emission_time(self, k: int) -> float:
        # integer microsecond grid, no accumulated drift
        return (to_ticks(self.flow.start_time) + to_ticks(k / self.flow.rate)) / US_PER_S

    def tick(self, t: float) -> Optional[Packet]:
        if not self.flow.active_at(t):
            return None
        f = self.flow
        pkt = self.new_packet(PacketKind.CBR_DATA, f.source, f.destination, f.packet_size,
                              flow=f.id, seq=self.seq, tclass=Priority.REALTIME,
                              key=("cbr", f.id, self.seq))
        self.seq += 1
        return pkt


def cbr_tick(flow: FlowSpec, t: float, new_packet: PacketFactory, seq: int = 0) -> Optional[Packet]:
    source = CbrSource(flow, new_packet)
    source.seq = seq
    return source.tick(t)


class TcpEvent(enum.Enum):
    START = "start"
    ACK = "ack"
    TIMEOUT = "timeout"
    ROUTE_AVAILABLE = "route"
    PROBE = "probe"


@dataclass
class TcpConfig:
    timeout: float = 1.0
    max_retries: int = 5
    stall_probe: float = 5.0


class TcpSource:
    """Stop-and-wait sender.

    One data segment is outstanding at a time. A timeout retransmits the
    same sequence number; after ``max_retries`` the flow stalls until the
    source node reports a route, or until the stall probe fires.
    """

    def __init__(self, flow: FlowSpec, sim: Simulator, new_packet: PacketFactory,
                 transmit: Callable[[Packet], None], config: TcpConfig | None = None):
        if flow.kind != FlowKind.TCP:
            raise ValueError("TcpSource needs a TCP flow")
        self.flow = flow
        self.sim = sim
        self.new_packet = new_packet
        self.transmit = transmit
        self.config = config or TcpConfig()
        self.seq = 0
        self.attempt = 0
        self.retries = 0
        self.stalled = False
        self.started = False
        self.timer = None
        self.acked = 0

    def _send(self) -> Packet:
        f = self.flow
        pkt = self.new_packet(PacketKind.TCP_DATA, f.source, f.destination, f.packet_size,
                              flow=f.id, seq=self.seq, tclass=Priority.NORMAL,
                              key=("tcp", f.id, self.seq, self.attempt))
        self.attempt += 1
        self.sim.cancel(self.timer)
        self.timer = self.sim.schedule_in(self.config.timeout, self.step, TcpEvent.TIMEOUT)
        return pkt

    def step(self, event: TcpEvent, ack_seq: Optional[int] = None) -> list[Packet]:
        now = self.sim.now
        out: list[Packet] = []
        if event == TcpEvent.START:
            self.started = True
            if self.flow.active_at(now):
                out.append(self._send())
        elif not self.started or not self.flow.active_at(now):
            self.sim.cancel(self.timer)
            return out
        elif event == TcpEvent.ACK:
            if ack_seq == self.seq:
                self.acked += 1
                self.seq += 1
                self.attempt = 0
                self.retries = 0
                self.stalled = False
                out.append(self._send())
        elif event == TcpEvent.TIMEOUT:
            if self.retries < self.config.max_retries:
                self.retries += 1
                out.append(self._send())
            else:
                self.stalled = True
                self.timer = self.sim.schedule_in(self.config.stall_probe, self.step,
                                                  TcpEvent.PROBE)
        elif event in (TcpEvent.ROUTE_AVAILABLE, TcpEvent.PROBE):
            if self.stalled:
                self.stalled = False
                self.retries = 0
                out.append(self._send())
        for pkt in out:
            self.transmit(pkt)
        return out


def tcp_step(source: TcpSource, event: TcpEvent, ack_seq: Optional[int] = None) -> list[Packet]:
    return source.step(event, ack_seq)


class TcpSink:
    """Acknowledges every data segment; delivers each sequence number once, in order."""

    def __init__(self, flow: FlowSpec, new_packet: PacketFactory):
        self.flow = flow
        self.new_packet = new_packet
        self.expected = 0
        self.delivered: list[int] = []
        self.duplicates = 0
        self._acks = 0

    def on_data(self, pkt: Packet) -> Packet:
        if pkt.seq == self.expected:
            self.delivered.append(pkt.seq)
            self.expected += 1
        else:
            self.duplicates += 1
        f = self.flow
        ack = self.new_packet(PacketKind.TCP_ACK, f.destination, f.source, ACK_SIZE,
                              flow=f.id, seq=pkt.seq, tclass=Priority.NORMAL,
                              key=("ack", f.id, pkt.seq, self._acks))
        self._acks += 1
        return ack

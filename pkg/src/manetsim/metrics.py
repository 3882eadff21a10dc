"""Packet trace records and the per-interval throughput / delivery / loss metrics.

Trace lines have the form::

    <action> <time> <node> <pkt_kind> <pkt_id> <size> <src> <dst> <reason>

with action one of ``s r f d`` and reason ``-`` unless the record is a drop.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, TextIO

from .packets import DATA_CLASS, PacketKind, Priority

DROP_REASONS = ("queue", "noroute", "priority", "ttl")
CLASSES = (Priority.REALTIME, Priority.NORMAL)
PAYLOAD_KINDS = {PacketKind.CBR_DATA.value: Priority.REALTIME,
                 PacketKind.TCP_DATA.value: Priority.NORMAL}
DATA_KIND_CLASS = {k.value: c for k, c in DATA_CLASS.items()}

CSV_COLUMNS = ["interval_start", "interval_end", "class", "throughput_pps", "delivery_ratio",
               "loss_count", "throughput_bps"] + [f"loss_{r}" for r in DROP_REASONS]


class EmptyInterval(ValueError):
    pass


class SinkUnwritable(OSError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    action: str
    time: float
    node: int
    pkt_kind: str
    pkt_id: int
    size: int
    src: int
    dst: int
    reason: str = "-"

    def format(self) -> str:
        return format_record(self.action, self.time, self.node, self.pkt_kind, self.pkt_id,
                             self.size, self.src, self.dst, self.reason)

    @classmethod
    def parse(cls, line: str) -> "TraceRecord":
        a, t, node, kind, pid, size, src, dst, reason = line.split()
        return cls(a, float(t), int(node), kind, int(pid), int(size), int(src), int(dst), reason)


def format_record(action, time, node, kind, pkt_id, size, src, dst, reason="-") -> str:
    return f"{action} {time:.6f} {node} {kind} {pkt_id} {size} {src} {dst} {reason}"


def read_trace(lines: Iterable[str]) -> Iterator[TraceRecord]:
    for line in lines:
        line = line.strip()
        if line:
            yield TraceRecord.parse(line)


def _check(t0: float, t1: float):
    if not t1 > t0:
        raise EmptyInterval(f"empty interval [{t0}, {t1})")


def _in(t: float, t0: float, t1: float, closed: bool) -> bool:
    return t0 <= t < t1 or (closed and t == t1)


def throughput(trace: Iterable[TraceRecord], cls: Priority, t0: float, t1: float,
               closed: bool = False) -> float:
    """Payload packets of ``cls`` received at their destination per second."""
    _check(t0, t1)
    n = sum(1 for r in trace
            if r.action == "r" and r.node == r.dst and PAYLOAD_KINDS.get(r.pkt_kind) == cls
            and _in(r.time, t0, t1, closed))
    return n / (t1 - t0)


def delivery_ratio(trace: Iterable[TraceRecord], cls: Priority, t0: float, t1: float,
                   closed: bool = False) -> Optional[float]:
    """Fraction of the payload packets sent in the window that reached their destination.

    Returns None when nothing of the class was sent in the window.
    """
    _check(t0, t1)
    sent, received = set(), set()
    for r in trace:
        if PAYLOAD_KINDS.get(r.pkt_kind) != cls:
            continue
        if r.action == "s" and r.node == r.src and _in(r.time, t0, t1, closed):
            sent.add(r.pkt_id)
        elif r.action == "r" and r.node == r.dst:
            received.add(r.pkt_id)
    if not sent:
        return None
    return len(sent & received) / len(sent)


@dataclass(frozen=True)
class Loss:
    total: int
    by_reason: dict

    def __eq__(self, other):
        if isinstance(other, int):
            return self.total == other
        return (self.total, self.by_reason) == (other.total, other.by_reason)

    def __int__(self):
        return self.total


def packet_loss(trace: Iterable[TraceRecord], cls: Priority, t0: float, t1: float,
                closed: bool = False) -> Loss:
    _check(t0, t1)
    by_reason = Counter({r: 0 for r in DROP_REASONS})
    for r in trace:
        if r.action == "d" and PAYLOAD_KINDS.get(r.pkt_kind) == cls and _in(r.time, t0, t1, closed):
            by_reason[r.reason] += 1
    return Loss(sum(by_reason.values()), dict(by_reason))


@dataclass
class IntervalMetrics:
    start: float
    end: float
    tclass: Priority
    throughput_pps: float
    delivery_ratio: Optional[float]
    loss_count: int
    throughput_bps: float = 0.0
    loss_by_reason: dict = field(default_factory=lambda: {r: 0 for r in DROP_REASONS})


@dataclass
class MetricsReport:
    interval_length: float
    rows: list = field(default_factory=list)

    def series(self, cls: Priority) -> list[IntervalMetrics]:
        return [row for row in self.rows if row.tclass == cls]

    def row(self, cls: Priority, start: float) -> IntervalMetrics:
        for r in self.rows:
            if r.tclass == cls and r.start == start:
                return r
        raise KeyError((cls, start))


def interval_bounds(horizon: float, length: float) -> list[tuple[float, float]]:
    if length <= 0:
        raise EmptyInterval("interval length must be positive")
    n = math.ceil(horizon / length - 1e-9)
    return [(k * length, min((k + 1) * length, horizon)) for k in range(n)]


def report_from_trace(trace: Iterable[TraceRecord], horizon: float,
                      interval: float) -> MetricsReport:
    """Recompute the metrics by scanning a finished trace."""
    records = list(trace)
    report = MetricsReport(interval)
    bounds = interval_bounds(horizon, interval)
    for i, (t0, t1) in enumerate(bounds):
        last = i == len(bounds) - 1
        for cls in CLASSES:
            loss = packet_loss(records, cls, t0, t1, closed=last)
            bits = sum(r.size * 8 for r in records
                       if r.action == "r" and r.node == r.dst
                       and PAYLOAD_KINDS.get(r.pkt_kind) == cls and _in(r.time, t0, t1, last))
            report.rows.append(IntervalMetrics(
                t0, t1, cls, throughput(records, cls, t0, t1, closed=last),
                delivery_ratio(records, cls, t0, t1, closed=last), loss.total,
                bits / (t1 - t0), loss.by_reason))
    return report


class MetricsAccumulator:
    """Incremental counterpart of report_from_trace, fed record by record during a run."""

    def __init__(self, horizon: float, interval: float):
        self.horizon = horizon
        self.interval = interval
        self.bounds = interval_bounds(horizon, interval)
        self._starts = [b[0] for b in self.bounds]
        n = len(self.bounds)
        self.received = {c: [0] * n for c in CLASSES}
        self.received_bytes = {c: [0] * n for c in CLASSES}
        self.sent = {c: [0] * n for c in CLASSES}
        self.delivered_of_sent = {c: [0] * n for c in CLASSES}
        self.losses = {c: [Counter() for _ in range(n)] for c in CLASSES}
        self._sent_slot: dict[int, int] = {}
        # per data kind (including acks) for the conservation identity
        self.totals = defaultdict(Counter)

    def _slot(self, t: float) -> Optional[int]:
        if not self.bounds or t < 0 or t > self.horizon:
            return None
        return bisect.bisect_right(self._starts, t) - 1

    def record(self, action: str, t: float, node: int, kind: str, pkt_id: int, size: int,
               src: int, dst: int, reason: str = "-"):
        dcls = DATA_KIND_CLASS.get(kind)
        if dcls is None:
            return
        totals = self.totals[dcls]
        if action == "s" and node == src:
            totals["generated"] += 1
        elif action == "r" and node == dst:
            totals["received"] += 1
        elif action == "d":
            totals[f"dropped_{reason}"] += 1
        cls = PAYLOAD_KINDS.get(kind)
        if cls is None:
            return
        slot = self._slot(t)
        if action == "s" and node == src:
            if slot is not None:
                self.sent[cls][slot] += 1
                self._sent_slot[pkt_id] = slot
        elif action == "r" and node == dst:
            sent_slot = self._sent_slot.get(pkt_id)
            if sent_slot is not None:
                self.delivered_of_sent[cls][sent_slot] += 1
            if slot is not None:
                self.received[cls][slot] += 1
                self.received_bytes[cls][slot] += size
        elif action == "d" and slot is not None:
            self.losses[cls][slot][reason] += 1

    def report(self) -> MetricsReport:
        rep = MetricsReport(self.interval)
        for k, (t0, t1) in enumerate(self.bounds):
            span = t1 - t0
            for cls in CLASSES:
                sent = self.sent[cls][k]
                loss = {r: self.losses[cls][k][r] for r in DROP_REASONS}
                rep.rows.append(IntervalMetrics(
                    t0, t1, cls, self.received[cls][k] / span,
                    self.delivered_of_sent[cls][k] / sent if sent else None,
                    sum(loss.values()), self.received_bytes[cls][k] * 8 / span, loss))
        return rep


def _fmt(value: float) -> str:
    return repr(float(value))


def emit_csv(report: MetricsReport, destination, absent_as_zero: bool = True) -> int:
    """Write one row per (interval, class); returns the number of data rows.

    ``destination`` is a path or a writable text stream.
    """
    def write(fh: TextIO) -> int:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in report.rows:
            if row.delivery_ratio is None:
                ratio = "0.0" if absent_as_zero else ""
            else:
                ratio = _fmt(row.delivery_ratio)
            w.writerow([_fmt(row.start), _fmt(row.end), row.tclass.label,
                        _fmt(row.throughput_pps), ratio, row.loss_count,
                        _fmt(row.throughput_bps)]
                       + [row.loss_by_reason.get(r, 0) for r in DROP_REASONS])
        return len(report.rows)

    if hasattr(destination, "write"):
        return write(destination)
    try:
        with open(destination, "w", newline="") as fh:
            return write(fh)
    except OSError as exc:
        raise SinkUnwritable(str(exc)) from exc


def read_csv(source, interval_length: Optional[float] = None) -> MetricsReport:
    fh = open(source, newline="") if not hasattr(source, "read") else source
    try:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            ratio = rec["delivery_ratio"]
            rows.append(IntervalMetrics(
                float(rec["interval_start"]), float(rec["interval_end"]),
                Priority.from_label(rec["class"]), float(rec["throughput_pps"]),
                float(ratio) if ratio != "" else None, int(rec["loss_count"]),
                float(rec["throughput_bps"]),
                {r: int(rec[f"loss_{r}"]) for r in DROP_REASONS}))
    finally:
        if fh is not source:
            fh.close()
    if interval_length is None:
        interval_length = rows[0].end - rows[0].start if rows else 0.0
    return MetricsReport(interval_length, rows)


def csv_text(report: MetricsReport, absent_as_zero: bool = True) -> str:
    buf = io.StringIO()
    emit_csv(report, buf, absent_as_zero)
    return buf.getvalue()

"""Scenario configuration and the line-oriented ``key = value`` file format.

A file is a flat list of top-level keys followed by any number of repeated
``[flow]`` and ``[node]`` sections::

    # two nodes talking
    node_count = 4
    protocol = eaodv
    area = 600x600

    [flow]
    source = 1
    destination = 3
    kind = tcp
    start = 5.0

    [node]
    id = 0
    x = 10
    y = 20

Absent keys keep their defaults, which reproduce the reference scenario:
ten nodes, 150 s, a 20-packet interface queue and three flows (two TCP-like,
one CBR starting at 60 s). If any ``[flow]`` section is present the default
flows are replaced; ``flows = none`` clears them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .aodv import AodvConfig
from .eaodv import ExpiryScope
from .mobility import MobilityConfig
from .traffic import FlowKind, FlowSpec, TcpConfig


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    pass


class Protocol(enum.Enum):
    AODV = "aodv"
    EAODV = "eaodv"

    @classmethod
    def parse(cls, text: str) -> "Protocol":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown protocol {text!r} (expected aodv or eaodv)") from None


def reference_flows() -> list[FlowSpec]:
    return [
        FlowSpec(0, 1, 3, FlowKind.TCP, 5.0),
        FlowSpec(1, 4, 7, FlowKind.TCP, 35.0),
        FlowSpec(2, 5, 8, FlowKind.CBR, 60.0),
    ]


@dataclass
class Scenario:
    node_count: int = 10
    sim_time: float = 150.0
    area_width: float = 600.0
    area_height: float = 600.0
    radio_range: float = 250.0
    protocol: Protocol = Protocol.AODV
    seed: int = 1
    flows: list = field(default_factory=reference_flows)
    speed_min: float = 1.0
    speed_max: float = 10.0
    pause_duration: float = 0.0
    metrics_interval: float = 10.0
    queue_capacity: int = 20
    hop_latency: float = 0.002
    jitter: float = 0.001
    expiry_scope: ExpiryScope = ExpiryScope.GLOBAL
    audit_interval: float = 0.0
    link_feedback: bool = False
    positions: dict = field(default_factory=dict)
    aodv: AodvConfig = field(default_factory=AodvConfig)
    tcp: TcpConfig = field(default_factory=TcpConfig)

    @property
    def area(self) -> tuple[float, float]:
        return (self.area_width, self.area_height)

    @property
    def mobility(self) -> MobilityConfig:
        return MobilityConfig(self.area_width, self.area_height, self.speed_min,
                              self.speed_max, self.pause_duration, self.radio_range)

    def with_protocol(self, protocol: Protocol) -> "Scenario":
        return replace(self, protocol=protocol)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def validate(self) -> "Scenario":
        if self.node_count < 1:
            raise ValidationError("node_count must be a positive integer")
        if self.sim_time < 0:
            raise ValidationError("sim_time must be non-negative")
        if self.radio_range <= 0:
            raise ValidationError("radio_range must be positive")
        if self.area_width <= 0 or self.area_height <= 0:
            raise ValidationError("area dimensions must be positive")
        if not 0 <= self.speed_min <= self.speed_max:
            raise ValidationError("need 0 <= speed_min <= speed_max")
        if self.pause_duration < 0:
            raise ValidationError("pause_duration must be non-negative")
        if self.metrics_interval <= 0:
            raise ValidationError("metrics_interval must be positive")
        if self.queue_capacity < 1:
            raise ValidationError("queue_capacity must be >= 1")
        if self.hop_latency <= 0 or self.jitter < 0:
            raise ValidationError("hop_latency must be positive and jitter non-negative")
        ids = set()
        for f in self.flows:
            for role, node in (("source", f.source), ("destination", f.destination)):
                if not 0 <= node < self.node_count:
                    raise ValidationError(
                        f"flow {f.id}: {role} node {node} not below node_count {self.node_count}")
            if f.id in ids:
                raise ValidationError(f"duplicate flow id {f.id}")
            ids.add(f.id)
            if f.rate <= 0 or f.packet_size <= 0:
                raise ValidationError(f"flow {f.id}: rate and packet_size must be positive")
        if self.flows and self.sim_time <= max(f.start_time for f in self.flows):
            raise ValidationError("sim_time must exceed every flow start_time")
        for node, (x, y) in self.positions.items():
            if not 0 <= node < self.node_count:
                raise ValidationError(f"position given for unknown node {node}")
            if not (0 <= x <= self.area_width and 0 <= y <= self.area_height):
                raise ValidationError(f"node {node} placed outside the area")
        return self


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity", "never"):
        return float("inf")
    return float(t)


_TOP_LEVEL = {
    "node_count": ("", "node_count", int),
    "sim_time": ("", "sim_time", _float),
    "area_width": ("", "area_width", _float),
    "area_height": ("", "area_height", _float),
    "radio_range": ("", "radio_range", _float),
    "protocol": ("", "protocol", Protocol.parse),
    "seed": ("", "seed", int),
    "speed_min": ("", "speed_min", _float),
    "speed_max": ("", "speed_max", _float),
    "pause_duration": ("", "pause_duration", _float),
    "metrics_interval": ("", "metrics_interval", _float),
    "queue_capacity": ("", "queue_capacity", int),
    "hop_latency": ("", "hop_latency", _float),
    "jitter": ("", "jitter", _float),
    "expiry_scope": ("", "expiry_scope", lambda s: ExpiryScope(s.strip().lower())),
    "audit_interval": ("", "audit_interval", _float),
    "link_feedback": ("", "link_feedback", _bool),
    "tcp_timeout": ("tcp", "timeout", _float),
    "tcp_max_retries": ("tcp", "max_retries", int),
    "tcp_stall_probe": ("tcp", "stall_probe", _float),
}
for _f in fields(AodvConfig):
    _TOP_LEVEL[_f.name] = ("aodv", _f.name, int if _f.type in ("int", int) else _float)

_FLOW_KEYS = {
    "source": ("source", int),
    "destination": ("destination", int),
    "kind": ("kind", FlowKind.parse),
    "start": ("start_time", _float),
    "start_time": ("start_time", _float),
    "stop": ("stop_time", _float),
    "stop_time": ("stop_time", _float),
    "packet_size": ("packet_size", int),
    "rate": ("rate", _float),
}


def _split(line: str, lineno: int) -> tuple[str, str]:
    if "=" not in line:
        raise ParseError(lineno, f"expected 'key = value', got {line!r}")
    key, value = line.split("=", 1)
    key, value = key.strip().lower(), value.strip()
    if not key or not value:
        raise ParseError(lineno, "empty key or value")
    return key, value


def _finish_flow(raw: dict, flow_id: int, lineno: int) -> FlowSpec:
    missing = {"source", "destination", "kind", "start_time"} - raw.keys()
    if missing:
        raise ParseError(lineno, f"[flow] missing {', '.join(sorted(missing))}")
    try:
        return FlowSpec(id=flow_id, **raw)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    flows: list[FlowSpec] = []
    saw_flow_section = False
    section: Optional[str] = None
    current: dict = {}
    section_line = 0

    def close(lineno):
        nonlocal current
        if section == "flow":
            flows.append(_finish_flow(current, len(flows), section_line))
        elif section == "node":
            if not {"id", "x", "y"} <= current.keys():
                raise ParseError(section_line, "[node] needs id, x and y")
            sc.positions[current["id"]] = (current["x"], current["y"])
        current = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(lineno, f"malformed section header {line!r}")
            close(lineno)
            section = line[1:-1].strip().lower()
            section_line = lineno
            if section not in ("flow", "node"):
                raise ParseError(lineno, f"unknown section [{section}]")
            saw_flow_section |= section == "flow"
            continue
        key, value = _split(line, lineno)
        try:
            if section == "flow":
                if key not in _FLOW_KEYS:
                    raise ParseError(lineno, f"unknown [flow] key {key!r}")
                name, conv = _FLOW_KEYS[key]
                current[name] = conv(value)
            elif section == "node":
                if key not in ("id", "x", "y"):
                    raise ParseError(lineno, f"unknown [node] key {key!r}")
                current[key] = int(value) if key == "id" else _float(value)
            elif key == "area":
                w, _, h = value.lower().partition("x")
                sc.area_width, sc.area_height = _float(w), _float(h)
            elif key == "flows":
                if value.lower() != "none":
                    raise ParseError(lineno, "only 'flows = none' is supported")
                saw_flow_section = True
            elif key in _TOP_LEVEL:
                target, name, conv = _TOP_LEVEL[key]
                obj = getattr(sc, target) if target else sc
                setattr(obj, name, conv(value))
            else:
                raise ParseError(lineno, f"unknown key {key!r}")
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    close(len(text.splitlines()))
    if saw_flow_section:
        sc.flows = flows
    return sc.validate()


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read())


def dump_scenario(sc: Scenario) -> str:
    """Inverse of parse_scenario for the keys it understands."""
    lines = []
    for key, (target, name, _) in _TOP_LEVEL.items():
        obj = getattr(sc, target) if target else sc
        value = getattr(obj, name)
        if isinstance(value, enum.Enum):
            value = value.value
        lines.append(f"{key} = {value}")
    if not sc.flows:
        lines.append("flows = none")
    for f in sc.flows:
        lines += ["", "[flow]", f"source = {f.source}", f"destination = {f.destination}",
                  f"kind = {f.kind.value}", f"start = {f.start_time}",
                  f"packet_size = {f.packet_size}", f"rate = {f.rate}"]
        if f.stop_time is not None:
            lines.append(f"stop = {f.stop_time}")
    for node, (x, y) in sorted(sc.positions.items()):
        lines += ["", "[node]", f"id = {node}", f"x = {x}", f"y = {y}"]
    return "\n".join(lines) + "\n"

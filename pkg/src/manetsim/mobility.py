"""Random waypoint mobility and fixed-range (closed disc) connectivity."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .engine import RandomStream


class UnknownNode(KeyError):
    pass


class Position(NamedTuple):
    x: float
    y: float

    def distance(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass
class MobilityConfig:
    area_width: float = 1000.0
    area_height: float = 1000.0
    speed_min: float = 1.0
    speed_max: float = 10.0
    pause_duration: float = 0.0
    radio_range: float = 250.0

    @property
    def static(self) -> bool:
        return self.speed_max <= 0


@dataclass
class RadioModel:
    range: float = 250.0

    def connected(self, a: Position, b: Position) -> bool:
        return a.distance(b) <= self.range


class _Leg(NamedTuple):
    depart: float   # movement starts
    arrive: float   # reaches target, pause begins
    resume: float   # pause ends, next leg departs
    start: Position
    target: Position


class WaypointState:
    """Trajectory of one node, extended lazily from the node's own stream."""

    def __init__(self, start: Position, config: MobilityConfig, stream: RandomStream):
        self.config = config
        self.stream = stream
        self.legs: list[_Leg] = []
        self._departs: list[float] = []
        if config.static:
            self._push(_Leg(0.0, math.inf, math.inf, start, start))
        else:
            self._push(self._draw_leg(0.0, start))

    def _push(self, leg: _Leg):
        self.legs.append(leg)
        self._departs.append(leg.depart)

    def _draw_leg(self, depart: float, start: Position) -> _Leg:
        cfg = self.config
        target = Position(self.stream.uniform(0.0, cfg.area_width),
                          self.stream.uniform(0.0, cfg.area_height))
        speed = self.stream.uniform(cfg.speed_min, cfg.speed_max)
        if speed <= 0:
            return _Leg(depart, math.inf, math.inf, start, start)
        arrive = depart + start.distance(target) / speed
        return _Leg(depart, arrive, arrive + cfg.pause_duration, start, target)

    def _extend(self, t: float):
        while self.legs[-1].resume <= t:
            last = self.legs[-1]
            self._push(self._draw_leg(last.resume, last.target))

    def leg_at(self, t: float) -> _Leg:
        self._extend(t)
        i = bisect.bisect_right(self._departs, t) - 1
        return self.legs[max(i, 0)]

    def position_at(self, t: float) -> Position:
        leg = self.leg_at(t)
        if t >= leg.arrive:
            return leg.target
        span = leg.arrive - leg.depart
        if span <= 0 or t <= leg.depart:
            return leg.start
        f = (t - leg.depart) / span
        return Position(leg.start.x + f * (leg.target.x - leg.start.x),
                        leg.start.y + f * (leg.target.y - leg.start.y))

    def arrivals(self, until: float) -> list[float]:
        self._extend(until)
        return [leg.arrive for leg in self.legs if leg.arrive <= until]


class RandomWaypoint:
    """Positions and connectivity for a set of nodes.

    Every node draws from its own substream, so a node's trajectory does not
    depend on query order or on how many other nodes exist.
    """

    def __init__(self, node_count: int, config: MobilityConfig | None = None, seed: int = 0,
                 initial_positions: dict[int, Sequence[float]] | None = None):
        self.config = config or MobilityConfig()
        self.radio = RadioModel(self.config.radio_range)
        self.node_count = node_count
        base = RandomStream(seed, "mobility")
        initial_positions = initial_positions or {}
        self.states: list[WaypointState] = []
        for node in range(node_count):
            stream = base.substream(node)
            if node in initial_positions:
                x, y = initial_positions[node]
                start = Position(float(x), float(y))
            else:
                start = Position(stream.uniform(0.0, self.config.area_width),
                                 stream.uniform(0.0, self.config.area_height))
            self.states.append(WaypointState(start, self.config, stream))
        self._cache_t = None
        self._cache: list[Position] = []

    def _check(self, node: int):
        if not 0 <= node < self.node_count:
            raise UnknownNode(node)

    def position_at(self, node: int, t: float) -> Position:
        self._check(node)
        return self.states[node].position_at(t)

    def positions_at(self, t: float) -> list[Position]:
        if t != self._cache_t:
            self._cache = [s.position_at(t) for s in self.states]
            self._cache_t = t
        return self._cache

    def in_range(self, a: int, b: int, t: float) -> bool:
        self._check(a)
        self._check(b)
        pos = self.positions_at(t)
        return self.radio.connected(pos[a], pos[b])

    def neighbors(self, node: int, t: float) -> set[int]:
        self._check(node)
        pos = self.positions_at(t)
        me = pos[node]
        rng = self.radio.range
        return {b for b, p in enumerate(pos) if b != node and me.distance(p) <= rng}

    def adjacency(self, t: float) -> dict[int, set[int]]:
        return {n: self.neighbors(n, t) for n in range(self.node_count)}

    def arrivals(self, until: float) -> list[tuple[float, int]]:
        out = [(t, node) for node, s in enumerate(self.states) for t in s.arrivals(until)]
        out.sort()
        return out

"""Hand-built scenarios used by tests and scripts."""

import math
from dataclasses import replace

from .scenario import Scenario
from .traffic import FlowKind, FlowSpec, TcpConfig

HUB, SRC, DST, SINK = 0, 1, 2, 3


def saturation_scenario(seed=1, sources=28, cbr_start=60.0, sim_time=65.0,
                        tcp_timeout=0.02, **kw) -> Scenario:
    """A relay whose queue is full of TCP traffic when a CBR flow starts.

    Hub R sits between the CBR pair S/D and the TCP sink T. A tight ring of
    TCP sources on the far side of R sends every segment and every ack
    through R. More flows than queue slots plus a short retransmit timeout
    keep R's queue full most of the time. S and D can only reach each other
    via R.
    """
    pos = {HUB: (500.0, 500.0), SRC: (500.0, 300.0), DST: (500.0, 700.0), SINK: (700.0, 500.0)}
    flows = [FlowSpec(0, SRC, DST, FlowKind.CBR, cbr_start)]
    for i in range(sources):
        node = 4 + i
        ang = 2 * math.pi * i / sources
        pos[node] = (300.0 + 15.0 * math.cos(ang), 500.0 + 15.0 * math.sin(ang))
        flows.append(FlowSpec(i + 1, node, SINK, FlowKind.TCP, 5.0 + 0.1 * i))
    return Scenario(node_count=4 + sources, sim_time=sim_time, area_width=1000.0,
                    area_height=1000.0, speed_min=0.0, speed_max=0.0, positions=pos,
                    flows=flows, seed=seed,
                    tcp=TcpConfig(timeout=tcp_timeout, max_retries=10**6), **kw)


def without_realtime(scenario: Scenario) -> Scenario:
    """Same scenario with every CBR flow removed."""
    return replace(scenario, flows=[f for f in scenario.flows if f.kind != FlowKind.CBR])

from hypothesis import given, settings
from hypothesis import strategies as st

from manetsim.aodv import AodvNode, RreqMessage
from manetsim.eaodv import (
    Decision,
    RealtimeSessionState,
    admit_rreq,
    classify,
    expire_normal_routes,
    forwarding_policy,
    on_realtime_start,
)
from manetsim.packets import Packet, PacketKind, Priority
from manetsim.queues import InterfaceQueue

RT, NORMAL = Priority.REALTIME, Priority.NORMAL


def pkt(kind, tclass=NORMAL):
    return Packet(0, kind, 0, 1, 40, 0.0, tclass=tclass)


def test_classify():
    assert classify(pkt(PacketKind.CBR_DATA, RT)) == RT
    assert classify(pkt(PacketKind.TCP_DATA)) == NORMAL
    assert classify(pkt(PacketKind.TCP_ACK)) == NORMAL
    assert classify(pkt(PacketKind.RREQ, RT)) == RT
    assert classify(pkt(PacketKind.RREP, RT)) == RT
    assert classify(pkt(PacketKind.RREQ, NORMAL)) == NORMAL
    assert classify(pkt(PacketKind.HELLO, RT)) == NORMAL
    assert classify(pkt(PacketKind.RERR, RT)) == NORMAL


def full_queue():
    q = InterfaceQueue(20)
    for i in range(20):
        q.enqueue(Packet(i, PacketKind.TCP_DATA, 0, 1, 512, 0.0))
    return q


def test_admit_rreq():
    msg = RreqMessage(5, 1, 1, 8, 0, 0, RT)
    assert admit_rreq(msg, full_queue()) == Decision.ACCEPT_PRIORITY
    normal = RreqMessage(1, 1, 1, 3, 0, 0, NORMAL)
    assert admit_rreq(normal, full_queue()) == Decision.REJECT_BUSY
    assert admit_rreq(normal, InterfaceQueue()) == Decision.ACCEPT_NORMAL


def test_forwarding_policy():
    assert forwarding_policy(pkt(PacketKind.TCP_DATA), True) == Decision.DROP_LOW_PRIORITY
    assert forwarding_policy(pkt(PacketKind.TCP_ACK), True) == Decision.DROP_LOW_PRIORITY
    assert forwarding_policy(pkt(PacketKind.CBR_DATA, RT), True) == Decision.FORWARD
    assert forwarding_policy(pkt(PacketKind.TCP_DATA), False) == Decision.FORWARD
    # control traffic is never subject to the drop policy
    assert forwarding_policy(pkt(PacketKind.RREQ), True) == Decision.FORWARD


def nodes_with_routes():
    a, b = AodvNode(1), AodvNode(2)
    a.table.offer(3, 2, 2, 4, 100.0, 0.0, tclass=NORMAL)
    a.table.offer(8, 2, 3, 1, 100.0, 0.0, tclass=RT)
    b.table.offer(3, 3, 1, 4, 100.0, 0.0, tclass=NORMAL)
    b.table.offer(7, 4, 1, 2, 1.0, 0.0, tclass=NORMAL)   # already expired at t=60
    return [a, b]


def test_realtime_start_expires_normal_routes_everywhere():
    nodes = nodes_with_routes()
    session = RealtimeSessionState()
    assert on_realtime_start(nodes, session, 2, 60.0) == 2
    a, b = nodes
    assert a.route_lookup(3, 60.0) is None and b.route_lookup(3, 60.0) is None
    assert a.route_lookup(8, 60.0) is not None
    # entries kept, sequence number bumped
    assert a.table.get(3).dest_seq_num == 5
    assert session.active and session.started_at == 60.0


def test_realtime_start_is_idempotent():
    nodes = nodes_with_routes()
    session = RealtimeSessionState()
    on_realtime_start(nodes, session, 2, 60.0)
    nodes[0].table.offer(3, 2, 2, 9, 100.0, 61.0, tclass=NORMAL)
    assert on_realtime_start(nodes, session, 9, 61.0) == 0
    assert nodes[0].route_lookup(3, 61.0) is not None


def test_no_normal_routes_returns_zero():
    assert expire_normal_routes(AodvNode(1), 0.0) == 0


def test_session_edges():
    s = RealtimeSessionState()
    assert s.begin(1, 10.0)
    assert not s.begin(2, 11.0)
    assert not s.end(1)
    assert s.active
    assert s.end(2)
    assert not s.active


@settings(max_examples=100)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 4)), max_size=40))
def test_session_active_iff_some_flow_running(events):
    s = RealtimeSessionState()
    running = set()
    for start, flow in events:
        if start:
            s.begin(flow, 0.0)
            running.add(flow)
        else:
            s.end(flow)
            running.discard(flow)
        assert s.active == bool(running)

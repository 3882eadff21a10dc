import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manetsim.aodv import (
    AodvConfig,
    AodvNode,
    Consume,
    Discard,
    DiscoveryAlreadyPending,
    Drop,
    Forward,
    Rebroadcast,
    RerrMessage,
    Reply,
    RouteAlreadyValid,
    RouteTable,
    RreqMessage,
    RrepMessage,
)
from manetsim.packets import Priority


def rreq(origin=1, dest=3, bid=1, oseq=1, known=0, hops=0, prio=Priority.NORMAL):
    return RreqMessage(origin, oseq, bid, dest, known, hops, prio)


# -- discovery ---------------------------------------------------------------

def test_initiate_discovery_builds_rreq():
    node = AodvNode(1)
    msg = node.initiate_route_discovery(3, Priority.NORMAL, 5.0)
    assert (msg.origin, msg.destination, msg.hop_count) == (1, 3, 0)
    assert msg.origin_seq == 1 and msg.broadcast_id == 1
    again = AodvNode(1)
    again.initiate_route_discovery(3, Priority.NORMAL, 5.0)
    again.abandon_discovery(3)
    second = again.initiate_route_discovery(3, Priority.NORMAL, 6.0)
    assert second.broadcast_id == 2 and second.origin_seq == 2


def test_back_to_back_discovery_is_rejected():
    node = AodvNode(1)
    node.initiate_route_discovery(3, Priority.NORMAL, 5.0)
    with pytest.raises(DiscoveryAlreadyPending):
        node.initiate_route_discovery(3, Priority.NORMAL, 5.1)


def test_discovery_needs_missing_route():
    node = AodvNode(1)
    node.table.offer(3, 2, 2, 1, 20.0, 0.0)
    with pytest.raises(RouteAlreadyValid):
        node.initiate_route_discovery(3, Priority.NORMAL, 5.0)


def test_retry_until_exhausted():
    node = AodvNode(1, AodvConfig(discovery_retries=2))
    node.initiate_route_discovery(3, Priority.REALTIME, 0.0)
    r1 = node.retry_discovery(3, 1.0)
    r2 = node.retry_discovery(3, 2.0)
    assert r1.broadcast_id == 2 and r2.broadcast_id == 3
    assert r2.priority == Priority.REALTIME
    assert node.retry_discovery(3, 3.0) is None
    assert 3 not in node.pending


# -- RREQ handling -----------------------------------------------------------

def test_destination_replies_with_its_sequence_number():
    dest = AodvNode(3)
    dest.seq_num = 7
    action = dest.handle_rreq(rreq(known=4, hops=1), sender=2, now=5.0)
    assert isinstance(action, Reply)
    assert action.rrep.dest_seq == 7 and action.rrep.hop_count == 0
    assert action.next_hop == 2
    rev = dest.table.get(1)
    assert (rev.next_hop, rev.hop_count, rev.dest_seq_num) == (2, 2, 1)


def test_duplicate_rreq_is_discarded():
    node = AodvNode(2)
    assert isinstance(node.handle_rreq(rreq(), 1, 5.0), Rebroadcast)
    action = node.handle_rreq(rreq(hops=1), 4, 5.001)
    assert action == Discard("duplicate")


def test_intermediate_rebroadcasts_with_incremented_hops():
    node = AodvNode(2)
    action = node.handle_rreq(rreq(hops=2), 5, 5.0)
    assert isinstance(action, Rebroadcast)
    assert action.rreq.hop_count == 3
    assert action.rreq.origin == 1 and action.rreq.broadcast_id == 1
    rev = node.table.get(1)
    assert rev.next_hop == 5 and rev.hop_count == 3


def test_intermediate_replies_from_fresh_enough_cache():
    node = AodvNode(2)
    node.table.offer(3, 4, 2, 5, 30.0, 0.0)
    action = node.handle_rreq(rreq(known=5), 1, 5.0)
    assert isinstance(action, Reply)
    assert action.rrep.dest_seq == 5 and action.rrep.hop_count == 2
    # cached route older than what the origin already knows: keep flooding
    other = AodvNode(2)
    other.table.offer(3, 4, 2, 5, 30.0, 0.0)
    assert isinstance(other.handle_rreq(rreq(known=6), 1, 5.0), Rebroadcast)


def test_own_rreq_is_ignored():
    node = AodvNode(1)
    msg = node.initiate_route_discovery(3, Priority.NORMAL, 0.0)
    assert node.handle_rreq(msg, 2, 0.01) == Discard("own")


def test_rreq_from_origin_installs_single_route_to_origin():
    node = AodvNode(2)
    node.handle_rreq(rreq(), 1, 0.0)
    assert node.table.get(1).hop_count == 1


# -- RREP handling -----------------------------------------------------------

def rrep(origin=1, dest=3, seq=4, hops=0):
    return RrepMessage(origin, dest, seq, hops, 10.0)


def test_rrep_at_origin_is_consumed():
    node = AodvNode(1)
    node.initiate_route_discovery(3, Priority.NORMAL, 0.0)
    action = node.handle_rrep(rrep(hops=1), 2, 0.01)
    assert isinstance(action, Consume)
    entry = node.route_lookup(3, 0.01)
    assert (entry.next_hop, entry.hop_count, entry.dest_seq_num) == (2, 2, 4)


def test_rrep_forwarded_along_reverse_route():
    node = AodvNode(2)
    node.handle_rreq(rreq(), 1, 0.0)
    action = node.handle_rrep(rrep(), 3, 0.02)
    assert isinstance(action, Forward)
    assert action.next_hop == 1 and action.rrep.hop_count == 1
    fwd = node.table.get(3)
    assert fwd.next_hop == 3 and fwd.expiry == pytest.approx(10.02)
    assert 1 in fwd.precursors


def test_rrep_without_reverse_route_is_dropped():
    node = AodvNode(2)
    assert node.handle_rrep(rrep(), 3, 0.0) == Drop("no_reverse_route")
    assert node.counters["no_reverse_route"] == 1


def test_stale_rrep_keeps_existing_route():
    node = AodvNode(1)
    node.table.offer(3, 5, 3, 9, 50.0, 0.0)
    node.handle_rrep(rrep(seq=4, hops=0), 2, 1.0)
    entry = node.table.get(3)
    assert (entry.next_hop, entry.hop_count, entry.dest_seq_num) == (5, 3, 9)


# -- maintenance -------------------------------------------------------------

def test_link_break_without_routes_emits_nothing():
    node = AodvNode(1)
    node.table.offer(3, 2, 2, 1, 50.0, 0.0)
    assert node.handle_link_break(7, 1.0) is None


def test_link_break_notifies_precursors():
    node = AodvNode(2)
    node.table.offer(3, 4, 2, 6, 50.0, 0.0)
    node.table.get(3).precursors.add(1)
    report = node.handle_link_break(4, 1.0)
    assert report.recipients == (1,)
    assert report.rerr.unreachable == ((3, 7),)
    entry = node.table.get(3)
    assert not entry.valid and entry.dest_seq_num == 7


def test_rerr_invalidates_only_routes_through_sender():
    node = AodvNode(1)
    node.table.offer(3, 2, 2, 6, 50.0, 0.0)
    node.table.offer(5, 4, 2, 1, 50.0, 0.0)
    report = node.handle_rerr(RerrMessage(((3, 7), (5, 2))), 2, 1.0)
    assert report.invalidated == ((3, 7),)
    assert node.route_lookup(3, 1.0) is None
    assert node.route_lookup(5, 1.0) is not None


def test_rerr_must_be_non_empty():
    with pytest.raises(ValueError):
        RerrMessage(())


def test_hello_only_with_active_routes():
    node = AodvNode(1)
    assert node.hello_tick(0.0) is None
    node.table.offer(3, 2, 2, 1, 50.0, 0.0)
    assert node.hello_tick(0.0).origin == 1


def test_hello_updates_liveness_and_staleness_threshold():
    node = AodvNode(1, AodvConfig(hello_interval=1.0, allowed_hello_loss=2))
    node.table.offer(3, 2, 2, 1, 50.0, 0.0)
    node.handle_hello(node.hello_tick(0.0), 2, 1.0)
    assert node.last_heard[2] == 1.0
    assert node.stale_neighbors(3.0) == []
    assert node.stale_neighbors(3.01) == [2]


def test_route_lookup_empty_and_expired():
    node = AodvNode(1)
    assert node.route_lookup(3, 0.0) is None
    node.table.offer(3, 2, 4, 1, 10.0, 0.0)
    assert node.route_lookup(3, 5.0, refresh=False).hop_count == 4
    assert node.route_lookup(3, 10.0) is None
    assert not node.table.get(3).valid


def test_lookup_refreshes_active_route():
    node = AodvNode(1)
    node.table.offer(3, 2, 4, 1, 10.0, 0.0)
    node.route_lookup(3, 8.0)
    assert node.table.get(3).expiry == pytest.approx(18.0)


# -- properties --------------------------------------------------------------

offers = st.tuples(
    st.sampled_from(["offer", "invalidate", "lookup"]),
    st.integers(0, 3),          # destination
    st.integers(0, 5),          # next hop
    st.integers(1, 8),          # hops
    st.integers(0, 12),         # seq
    st.floats(0, 5),            # time step
)


@settings(max_examples=200)
@given(st.lists(offers, max_size=80))
def test_route_table_sequence_numbers_never_decrease(ops):
    table = RouteTable(99)
    now = 0.0
    last_seen = {}
    for op, dest, hop, hops, seq, dt in ops:
        now += dt
        if op == "offer":
            table.offer(dest, hop, hops, seq, now + 10.0, now)
        elif op == "invalidate" and table.get(dest) is not None:
            table.invalidate(table.get(dest))
        else:
            table.lookup(dest, now)
        for e in table:
            assert e.dest_seq_num >= last_seen.get(e.destination, 0)
            last_seen[e.destination] = e.dest_seq_num
    assert table.violations == []


@settings(max_examples=200)
@given(st.lists(offers, max_size=60))
def test_accepted_offer_is_fresher(ops):
    table = RouteTable(99)
    now = 0.0
    for op, dest, hop, hops, seq, dt in ops:
        now += dt
        before = table.get(dest)
        snapshot = None if before is None else (before.usable(now), before.dest_seq_num,
                                                before.hop_count)
        if table.offer(dest, hop, hops, seq, now + 10.0, now) and snapshot is not None:
            usable, old_seq, old_hops = snapshot
            if usable:
                assert seq > old_seq or (seq == old_seq and hops < old_hops)
            else:
                assert seq >= old_seq


rreq_stream = st.lists(st.tuples(st.integers(0, 4), st.integers(1, 4), st.integers(0, 6),
                                 st.floats(0, 2)), max_size=60)


@settings(max_examples=150)
@given(rreq_stream)
def test_never_rebroadcasts_same_request_twice(stream):
    node = AodvNode(9, AodvConfig(rreq_cache_lifetime=1.0))
    now = 0.0
    rebroadcast = []
    for origin, bid, sender, dt in stream:
        now += dt
        action = node.handle_rreq(rreq(origin=origin, dest=8, bid=bid, oseq=bid), sender, now)
        if isinstance(action, Rebroadcast):
            rebroadcast.append((origin, bid))
    assert len(rebroadcast) == len(set(rebroadcast))

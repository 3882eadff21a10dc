import pytest
from hypothesis import given
from hypothesis import strategies as st

from manetsim.packets import PacketKind, Priority
from manetsim.queues import Decision, InterfaceQueue, enqueue

RT, NORMAL = Priority.REALTIME, Priority.NORMAL


def fill(q, make, prio, n):
    return [enqueue(q, make(priority=prio)) for _ in range(n)]


def test_below_capacity_always_queued(packet_factory):
    q = InterfaceQueue(20)
    fill(q, packet_factory, NORMAL, 19)
    assert enqueue(q, packet_factory(priority=NORMAL)) == (Decision.QUEUED, None)
    assert len(q) == 20 and q.full


def test_full_normal_queue_drops_normal(packet_factory):
    q = InterfaceQueue(20)
    fill(q, packet_factory, NORMAL, 20)
    assert enqueue(q, packet_factory(priority=NORMAL)) == (Decision.DROPPED_TAIL, None)
    assert len(q) == 20


def test_realtime_evicts_normal_tail(packet_factory):
    q = InterfaceQueue(20)
    fill(q, packet_factory, NORMAL, 20)
    tail = q.normal[-1]
    rt = packet_factory(kind=PacketKind.CBR_DATA, priority=RT)
    decision, evicted = enqueue(q, rt)
    assert decision == Decision.QUEUED
    assert evicted is tail
    assert len(q) == 20
    assert q.dequeue() is rt


def test_all_realtime_queue_drops_realtime(packet_factory):
    q = InterfaceQueue(20)
    fill(q, packet_factory, RT, 20)
    assert enqueue(q, packet_factory(priority=RT)) == (Decision.DROPPED_TAIL, None)


def test_capacity_must_be_positive():
    with pytest.raises(ValueError):
        InterfaceQueue(0)


def test_empty_dequeue():
    assert InterfaceQueue().dequeue() is None


ops = st.lists(st.one_of(st.sampled_from([RT, NORMAL]), st.just(None)), max_size=120)


@given(ops, st.integers(1, 25))
def test_queue_invariants(sequence, capacity):
    import itertools

    from manetsim.packets import Packet
    ids = itertools.count()
    q = InterfaceQueue(capacity)
    model_rt, model_normal = [], []
    for op in sequence:
        if op is None:
            got = q.dequeue()
            if model_rt:
                # never a normal packet while realtime is waiting
                assert got is model_rt.pop(0)
            elif model_normal:
                assert got is model_normal.pop(0)
            else:
                assert got is None
        else:
            p = Packet(next(ids), PacketKind.CBR_DATA, 0, 1, 10, 0.0, priority=op)
            decision, evicted = q.enqueue(p)
            full = len(model_rt) + len(model_normal) >= capacity
            if not full:
                assert (decision, evicted) == (Decision.QUEUED, None)
            elif op == RT and model_normal:
                assert decision == Decision.QUEUED
                assert evicted is model_normal.pop()
            else:
                assert (decision, evicted) == (Decision.DROPPED_TAIL, None)
            if decision == Decision.QUEUED:
                (model_rt if op == RT else model_normal).append(p)
        assert len(q) <= capacity
        assert list(q) == model_rt + model_normal

import itertools

import pytest

from manetsim.packets import Packet, PacketKind, Priority


@pytest.fixture
def packet_factory():
    ids = itertools.count()

    def make(kind=PacketKind.TCP_DATA, src=0, dst=1, size=512, priority=Priority.NORMAL,
             **kw):
        return Packet(next(ids), kind, src, dst, size, 0.0, priority=priority, **kw)

    return make


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")

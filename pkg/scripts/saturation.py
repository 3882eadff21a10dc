"""Route setup latency for a CBR flow crossing a relay saturated by TCP traffic.

    python scripts/saturation.py --seeds 1,2,3
"""

import argparse

from manetsim.crafted import saturation_scenario
from manetsim.harness import simulate
from manetsim.scenario import Protocol


def route_latencies(seed, **kw):
    """(latency or None, realtime RREQs dropped on full queues) per protocol."""
    out = {}
    for proto in Protocol:
        sc = saturation_scenario(seed, protocol=proto, **kw)
        net, _ = simulate(sc)
        out[proto.value] = (net.route_latency(sc.flows[0]),
                            net.counters.get("drop_rreq_realtime_queue", 0))
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--sources", type=int, default=28)
    args = p.parse_args(argv)
    print("seed,protocol,route_latency_s,realtime_rreq_queue_drops")
    for seed in (int(s) for s in args.seeds.split(",")):
        for proto, (lat, drops) in route_latencies(seed, sources=args.sources).items():
            print(f"{seed},{proto},{'' if lat is None else f'{lat:.6f}'},{drops}")


if __name__ == "__main__":
    main()

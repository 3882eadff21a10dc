"""Compare AODV and EAODV on a scenario over many seeds and print CBR series.

Writes the usual run tree plus comparison.csv under --out, then prints one
table per metric (mean per interval for each protocol and the delta).

    python scripts/reproduce_figures.py --out results --seeds 1-20
"""

import argparse

from manetsim.harness import METRICS, compare, default_jobs
from manetsim.scenario import Scenario, load_scenario


def seed_range(text):
    if "-" in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",")]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", help="scenario file (default: built-in reference)")
    p.add_argument("--seeds", type=seed_range, default=seed_range("1-20"))
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=default_jobs())
    args = p.parse_args(argv)

    sc = load_scenario(args.scenario) if args.scenario else Scenario()
    report = compare(sc, args.seeds, args.out, jobs=args.jobs)
    for metric in METRICS:
        print(f"\n{metric} ({len(args.seeds)} seeds, realtime class)")
        print(f"{'interval':>10} {'aodv':>9} {'eaodv':>9} {'delta':>9}  wins e/a/tie")
        for r in report.rows:
            if r.metric != metric:
                continue
            if r.aodv_mean is None:
                cells = f"{'-':>9} {'-':>9} {'-':>9}"
            else:
                cells = f"{r.aodv_mean:9.4f} {r.eaodv_mean:9.4f} {r.delta_mean:+9.4f}"
            print(f"{r.interval_start:>5g}-{r.interval_end:<4g} {cells}  "
                  f"{r.eaodv_wins}/{r.aodv_wins}/{r.ties}")


if __name__ == "__main__":
    main()

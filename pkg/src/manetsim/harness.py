"""Run orchestration: single runs, conservation checking and AODV/EAODV comparison."""

from __future__ import annotations

import csv
import logging
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .metrics import CLASSES, MetricsReport, emit_csv
from .network import ConservationViolation, Network
from .packets import Priority
from .scenario import Protocol, Scenario

log = logging.getLogger(__name__)

METRICS = ("throughput_pps", "delivery_ratio", "loss_count")


@dataclass
class RunSummary:
    protocol: str
    seed: int
    events: int
    totals: dict
    conservation_ok: bool
    trace_hash: str
    report: MetricsReport
    route_latency: dict = field(default_factory=dict)
    seq_violations: int = 0
    cycle_violations: int = 0
    audit_checks: int = 0
    counters: dict = field(default_factory=dict)
    wall_time: float = 0.0
    trace_path: Optional[str] = None
    metrics_path: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "protocol": self.protocol, "seed": self.seed, "events": self.events,
            "totals": self.totals, "conservation_ok": self.conservation_ok,
            "trace_hash": self.trace_hash, "route_latency": self.route_latency,
            "seq_violations": self.seq_violations, "cycle_violations": self.cycle_violations,
            "wall_time": round(self.wall_time, 3),
            "trace": self.trace_path, "metrics": self.metrics_path,
        }


def conservation_totals(net: Network) -> dict:
    """Per-class and global packet accounting for data packets (including acks)."""
    in_flight = net.in_flight()
    totals = {}
    for cls in CLASSES:
        c = net.metrics.totals[cls]
        row = {"generated": c["generated"], "received": c["received"]}
        for key, value in sorted(c.items()):
            if key.startswith("dropped_"):
                row[key] = value
        row["in_flight"] = in_flight[cls]
        totals[cls.label] = row
    glob = {}
    for row in totals.values():
        for k, v in row.items():
            glob[k] = glob.get(k, 0) + v
    totals["all"] = glob
    return totals


def conservation_holds(totals: dict) -> bool:
    for row in totals.values():
        accounted = row["received"] + row["in_flight"] + sum(
            v for k, v in row.items() if k.startswith("dropped_"))
        if accounted != row["generated"]:
            return False
    return True


def simulate(scenario: Scenario) -> tuple[Network, RunSummary]:
    """Execute one scenario in memory."""
    t0 = time.perf_counter()
    net = Network(scenario)
    events = net.run()
    totals = conservation_totals(net)
    ok = conservation_holds(totals)
    if not ok:
        raise ConservationViolation(f"packet accounting does not balance: {totals}")
    summary = RunSummary(
        protocol=scenario.protocol.value, seed=scenario.seed, events=events, totals=totals,
        conservation_ok=ok, trace_hash=net.trace_hash(), report=net.metrics.report(),
        route_latency={f.id: net.route_latency(f) for f in scenario.flows},
        seq_violations=len(net.seq_violations()),
        cycle_violations=len(net.audit_violations), audit_checks=net.audit_checks,
        counters=dict(net.counters), wall_time=time.perf_counter() - t0)
    log.info("%s seed=%s: %d events in %.2fs", summary.protocol, summary.seed, events,
             summary.wall_time)
    return net, summary


def run(scenario: Scenario, out_dir) -> RunSummary:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net, summary = simulate(scenario)
    trace_path = out / "trace.txt"
    metrics_path = out / "metrics.csv"
    trace_path.write_text(net.trace_text())
    emit_csv(summary.report, metrics_path)
    summary.trace_path = str(trace_path)
    summary.metrics_path = str(metrics_path)
    return summary


def _run_one(args) -> RunSummary:
    scenario, out_dir = args
    if out_dir is None:
        return simulate(scenario)[1]
    return run(scenario, out_dir)


@dataclass
class ComparisonRow:
    interval_start: float
    interval_end: float
    metric: str
    aodv_mean: Optional[float]
    aodv_std: Optional[float]
    eaodv_mean: Optional[float]
    eaodv_std: Optional[float]
    delta_mean: Optional[float]
    eaodv_wins: int
    aodv_wins: int
    ties: int


@dataclass
class ComparisonReport:
    seeds: list
    rows: list
    per_seed: list
    summaries: dict

    def row(self, metric: str, start: float) -> ComparisonRow:
        for r in self.rows:
            if r.metric == metric and r.interval_start == start:
                return r
        raise KeyError((metric, start))


def _stats(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return statistics.fmean(values), std


def _better(metric: str, eaodv_value, aodv_value) -> int:
    """+1 if EAODV is better, -1 if AODV is, 0 for a tie or an undefined value."""
    if eaodv_value is None or aodv_value is None or eaodv_value == aodv_value:
        return 0
    higher_is_better = metric != "loss_count"
    return 1 if (eaodv_value > aodv_value) == higher_is_better else -1


def compare(scenario: Scenario, seeds: Sequence[int], out_dir=None, jobs: int = 1,
            tclass: Priority = Priority.REALTIME) -> ComparisonReport:
    if not seeds:
        raise ValueError("need at least one seed")
    tasks = []
    for seed in seeds:
        for proto in (Protocol.AODV, Protocol.EAODV):
            sc = scenario.with_seed(seed).with_protocol(proto)
            sub = None if out_dir is None else Path(out_dir) / proto.value / str(seed)
            tasks.append((sc, sub))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    summaries = {(r.protocol, r.seed): r for r in results}

    bounds = [(row.start, row.end) for row in
              summaries[("aodv", seeds[0])].report.series(tclass)]
    rows, per_seed = [], []
    for t0, t1 in bounds:
        for metric in METRICS:
            a_vals, e_vals, verdicts = [], [], []
            for seed in seeds:
                a = getattr(summaries[("aodv", seed)].report.row(tclass, t0), metric)
                e = getattr(summaries[("eaodv", seed)].report.row(tclass, t0), metric)
                a_vals.append(a)
                e_vals.append(e)
                verdicts.append(_better(metric, e, a))
                delta = None if a is None or e is None else e - a
                per_seed.append((t0, t1, metric, seed, a, e, delta))
            am, asd = _stats(a_vals)
            em, esd = _stats(e_vals)
            rows.append(ComparisonRow(
                t0, t1, metric, am, asd, em, esd,
                None if am is None or em is None else em - am,
                verdicts.count(1), verdicts.count(-1), verdicts.count(0)))
    report = ComparisonReport(list(seeds), rows, per_seed, summaries)
    if out_dir is not None:
        write_comparison(report, out_dir)
    return report


def _cell(v):
    return "" if v is None else repr(float(v))


def write_comparison(report: ComparisonReport, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval_start", "interval_end", "metric", "aodv_mean", "aodv_std",
                    "eaodv_mean", "eaodv_std", "delta_mean", "eaodv_wins", "aodv_wins", "ties",
                    "seeds"])
        for r in report.rows:
            w.writerow([_cell(r.interval_start), _cell(r.interval_end), r.metric,
                        _cell(r.aodv_mean), _cell(r.aodv_std), _cell(r.eaodv_mean),
                        _cell(r.eaodv_std), _cell(r.delta_mean), r.eaodv_wins, r.aodv_wins,
                        r.ties, len(report.seeds)])
    with open(out / "comparison_seeds.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval_start", "interval_end", "metric", "seed", "aodv", "eaodv",
                    "delta"])
        for t0, t1, metric, seed, a, e, d in report.per_seed:
            w.writerow([_cell(t0), _cell(t1), metric, seed, _cell(a), _cell(e), _cell(d)])


def default_jobs() -> int:
    return max(1, min(8, (os.cpu_count() or 1)))

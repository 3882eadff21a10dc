"""Command line entry point: ``manetsim run|compare|validate``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import harness
from .scenario import Protocol, load_scenario

log = logging.getLogger("manetsim")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"usage: {message}")


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    if len(set(seeds)) != len(seeds):
        raise argparse.ArgumentTypeError("duplicate seeds")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="manetsim", description="AODV / EAODV MANET simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--protocol", type=Protocol.parse)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)

    c = sub.add_parser("compare", help="run both protocols over a seed set")
    c.add_argument("--scenario", required=True)
    c.add_argument("--seeds", type=_seeds, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--jobs", type=int, default=1)

    v = sub.add_parser("validate", help="parse and check a scenario file")
    v.add_argument("--scenario", required=True)
    return p


def configure_logging():
    level = os.environ.get("MANETSIM_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise CliError(f"MANETSIM_LOG: unknown level {level!r}")
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _cmd_run(args) -> dict:
    sc = load_scenario(args.scenario)
    if args.protocol is not None:
        sc = sc.with_protocol(args.protocol)
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    out = Path(args.out) / sc.protocol.value / str(sc.seed)
    summary = harness.run(sc, out)
    return {"status": "ok", **summary.as_dict()}


def _cmd_compare(args) -> dict:
    sc = load_scenario(args.scenario)
    report = harness.compare(sc, args.seeds, args.out, jobs=max(1, args.jobs))
    wins = sum(r.eaodv_wins for r in report.rows)
    losses = sum(r.aodv_wins for r in report.rows)
    return {"status": "ok", "seeds": report.seeds,
            "comparison": str(Path(args.out) / "comparison.csv"),
            "eaodv_wins": wins, "aodv_wins": losses}


def _cmd_validate(args) -> dict:
    sc = load_scenario(args.scenario)
    return {"status": "ok", "nodes": sc.node_count, "flows": len(sc.flows),
            "sim_time": sc.sim_time, "protocol": sc.protocol.value}


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "validate": _cmd_validate}


def main(argv=None) -> int:
    try:
        configure_logging()
        args = build_parser().parse_args(argv)
        result = COMMANDS[args.command](args)
    except Exception as exc:  # every failure becomes one parsable line
        name = "UsageError" if isinstance(exc, CliError) else type(exc).__name__
        msg = " ".join(str(exc).split()) or name
        print(f"error: {name}: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, CliError) else 1
    print(json.dumps(result, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())

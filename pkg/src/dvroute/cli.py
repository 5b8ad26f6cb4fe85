"""Command line front end: ``dvroute simulate --scenario FILE --protocol NAME``."""

from __future__ import annotations

import argparse
import json
import sys

from . import registry
from .engine import ASYNCHRONOUS, SYNCHRONOUS, Engine, write_trace
from .report import build_report, write_report
from .scenario import ScenarioError, parse_value, load


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dvroute", description="Distance-vector routing simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and judge it against the oracle")
    sim.add_argument("--scenario", required=True, help="scenario file (INI format)")
    sim.add_argument("--protocol", required=True, choices=sorted(registry.PROTOCOLS))
    sim.add_argument("--mode", help="protocol working mode, e.g. strict for rip-mti")
    sim.add_argument("--mitigation", help="RIP mitigations, comma separated")
    sim.add_argument("--engine", choices=(ASYNCHRONOUS, SYNCHRONOUS), help="event engine mode")
    sim.add_argument("--seed", type=int, help="RNG seed (overrides the scenario)")
    sim.add_argument("--horizon", type=int, help="last tick to simulate (overrides the scenario)")
    sim.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="protocol parameter override")
    sim.add_argument("--out", help="write the CSV trace here")
    sim.add_argument("--report", help="write the JSON report here")
    sim.add_argument("--check-loops", action="store_true", help="detect loop episodes; exit 1 if any")

    sub.add_parser("protocols", help="list protocol selectors")
    return p


def simulate(args: argparse.Namespace) -> int:
    try:
        sc = load(args.scenario)
    except (OSError, ScenarioError) as e:
        print(f"dvroute: cannot load scenario: {e}", file=sys.stderr)
        return 2
    params = dict(sc.params)
    if args.mode:
        params["mode"] = args.mode
    if args.mitigation:
        params["mitigation"] = args.mitigation
    for item in args.param:
        key, eq, value = item.partition("=")
        if not eq:
            print(f"dvroute: --param expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        params[key] = parse_value(value)
    info = registry.get(args.protocol)
    seed = sc.seed if args.seed is None else args.seed
    horizon = sc.horizon if args.horizon is None else args.horizon
    engine_mode = args.engine or sc.engine
    try:
        eng = Engine(sc.topology, registry.factory(args.protocol, params), mode=engine_mode, seed=seed)
        for s, d in sc.latency.items():
            eng.set_latency(s, d)
        trace = eng.run(sc.events, horizon)
    except ValueError as e:
        print(f"dvroute: {e}", file=sys.stderr)
        return 2

    report = build_report(trace, sc.topology, info, params, check_loops=args.check_loops)
    if args.out:
        write_trace(trace, args.out)
    if args.report:
        write_report(report, args.report)

    summary = {
        "protocol": report["protocol"],
        "convergence_tick": report["convergence_tick"],
        "messages": sum(report["messages"].values()),
        "oracle_mismatches": len(report["oracle_mismatches"]),
    }
    if args.check_loops:
        summary["loop_episodes"] = len(report["loop_episodes"])
    if "invariant_violations" in report:
        summary["invariant_violations"] = report["invariant_violations"]["count"]
    print(json.dumps(summary))
    if args.check_loops and report["loop_episodes"]:
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "protocols":
        for name, info in sorted(registry.PROTOCOLS.items()):
            doc = sys.modules[info.cls.__module__].__doc__ or ""
            print(f"{name}\t{doc.strip().splitlines()[0] if doc.strip() else ''}")
        return 0
    return simulate(args)


if __name__ == "__main__":
    sys.exit(main())

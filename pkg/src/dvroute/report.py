"""Summaries of a finished run, judged against the oracle."""

from __future__ import annotations

import json
import math
from pathlib import Path

from . import oracle
from .engine import Trace
from .registry import ProtocolInfo
from .topology import Topology


def _num(x: float):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def build_report(
    trace: Trace,
    topology: Topology,
    info: ProtocolInfo,
    params: dict | None = None,
    check_loops: bool = True,
) -> dict:
    """Convergence, message counts, loops, mismatches and protocol annotations.

    ``topology`` is the network as it was at tick 0; the final link state is
    replayed from the trace before the oracle runs.
    """
    final = oracle.final_topology(topology, trace)
    truth = info.oracle(final, params)
    report = {
        "protocol": trace.protocol,
        "engine": trace.mode,
        "seed": trace.seed,
        "horizon": trace.horizon,
        "convergence_tick": oracle.convergence_tick(trace, truth, info.infinity, info.reactive, info.invariant),
        "messages": dict(sorted(trace.totals().items())),
        "dropped": dict(sorted(trace.dropped.items())),
        "oracle_mismatches": [
            {"router": r, "destination": d, "expected": _num(e), "got": _num(g)}
            for r, d, e, g in oracle.mismatches(trace.snapshots[-1], truth, info.infinity, info.reactive)
        ],
    }
    if check_loops:
        report["loop_episodes"] = [e.as_dict() for e in oracle.loop_episodes(trace, info.infinity)]
    if info.invariant is not None:
        bad = [(t, v) for t, vs in oracle.per_tick(trace, info.invariant) for v in vs]
        report["invariant_violations"] = {"count": len(bad), "first": [f"{t}: {v}" for t, v in bad[:10]]}
    counters: dict[str, int] = {}
    for per_router in trace.counters.values():
        for k, v in per_router.items():
            counters[k] = counters.get(k, 0) + v
    report["annotations"] = {
        "counters": dict(sorted(counters.items())),
        "notes": [f"{t} {r}: {text}" for t, r, text in trace.notes],
    }
    return report


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")

"""Cached simulation runs shared by several test modules.

Corpus sweeps are the slow part of the suite; each (protocol, seed, params)
combination runs once per session no matter how many tests look at it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from dvroute import corpus, oracle, registry
from dvroute.engine import Trace, run
from dvroute.oracle import OracleResult
from dvroute.registry import ProtocolInfo

SEEDS = range(50)

# criterion number -> (passed, detail), filled in by test_acceptance
RESULTS: dict[int, tuple[bool, str]] = {}


@dataclass(frozen=True)
class Outcome:
    scenario: corpus.Scenario
    trace: Trace
    truth: OracleResult
    info: ProtocolInfo

    @property
    def loops(self) -> list:
        return oracle.loop_episodes(self.trace, self.info.infinity)

    @property
    def converged_at(self) -> int | None:
        return oracle.convergence_tick(
            self.trace, self.truth, self.info.infinity, self.info.reactive, self.info.invariant
        )

    def violations(self) -> list[tuple[int, str]]:
        if self.info.invariant is None:
            return []
        return [(t, v) for t, vs in oracle.per_tick(self.trace, self.info.invariant) for v in vs]


@lru_cache(maxsize=None)
def corpus_run(protocol: str, seed: int, params: tuple = ()) -> Outcome:
    """Run ``protocol`` on corpus scenario ``seed``; ``params`` is a tuple of pairs."""
    info = registry.get(protocol)
    sc = corpus.scenario(seed, vector=protocol == "eigrp", data=info.reactive)
    p = dict(params)
    trace = run(sc.topology, registry.factory(protocol, p), sc.script, horizon=sc.horizon)
    truth = info.oracle(oracle.final_topology(sc.topology, trace), p)
    return Outcome(sc, trace, truth, info)


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (ok, detail)
    assert ok, f"criterion {n}: {detail}"

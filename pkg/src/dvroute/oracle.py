"""Ground truth: centralized shortest paths, loop detection and convergence."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .engine import Trace
from .protocols.base import INF, Row
from .protocols.eigrp import DEFAULT_K, VectorMetric, composite_metric, link_vector
from .topology import Topology

# metric algebras
SUBNET_HOPS = "subnet-hops"  # RIP family: destinations are subnets, attached = 0
ROUTER_HOPS = "router-hops"  # AODV: destinations are routers
ROUTER_COST = "router-cost"  # Babel: routers, per-link ``cost`` attribute
COMPOSITE = "composite"  # EIGRP


@dataclass
class OracleResult:
    algebra: str
    metric: dict[tuple[str, str], float] = field(default_factory=dict)
    next_hops: dict[tuple[str, str], frozenset[str]] = field(default_factory=dict)

    @property
    def destinations(self) -> list[str]:
        return sorted({d for _, d in self.metric})

    def get(self, router: str, dest: str) -> float:
        return self.metric.get((router, dest), INF)


def _edges(topology: Topology) -> dict[str, list[tuple[str, str]]]:
    """router -> [(neighbor, subnet)] over up subnets, sorted."""
    return {r: sorted((n, s) for n, s in topology.neighbors(r)) for r in sorted(topology.routers)}


def _dijkstra_all(topology: Topology, weight: Callable[[str], float], sources: dict[str, float]) -> dict[str, float]:
    edges = _edges(topology)
    dist = dict(sources)
    heap = [(d, r) for r, d in sources.items()]
    heapq.heapify(heap)
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, s in edges[u]:
            nd = d + weight(s)
            if nd < dist.get(v, INF):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def _scalar_paths(topology: Topology, algebra: str, cap: float) -> OracleResult:
    res = OracleResult(algebra)
    edges = _edges(topology)
    if algebra == SUBNET_HOPS:
        weight = lambda s: 1
        targets = {d: {r: 0 for r in topology.routers_on(d)} for d in topology.subnets if topology.is_up(d)}
        for d in topology.subnets:
            targets.setdefault(d, {})
    else:
        if algebra == ROUTER_COST:
            weight = lambda s: topology.attrs.get(s, {}).get("cost", 1)
        else:
            weight = lambda s: 1
        targets = {d: {d: 0} for d in topology.routers}
    for d, src in sorted(targets.items()):
        dist = _dijkstra_all(topology, weight, src)
        for r in sorted(topology.routers):
            m = dist.get(r, INF)
            if m >= cap:
                m = INF
            res.metric[(r, d)] = m
            if m == INF or r in src:
                res.next_hops[(r, d)] = frozenset()
            else:
                res.next_hops[(r, d)] = frozenset(
                    n for n, s in edges[r] if dist.get(n, INF) + weight(s) == m
                )
    return res


def _composite_paths(topology: Topology, k=DEFAULT_K) -> OracleResult:
    res = OracleResult(COMPOSITE)
    edges = _edges(topology)
    for d in topology.subnets:
        best: dict[str, VectorMetric] = {}
        if topology.is_up(d):
            for r in topology.routers_on(d):
                best[r] = link_vector(topology, d)
        attached = set(best)
        for _ in range(len(topology.routers) + 1):
            changed = False
            for r in sorted(topology.routers):
                if r in attached:
                    continue
                cur = composite_metric(best.get(r), k)
                for n, s in edges[r]:
                    if n not in best:
                        continue
                    v = best[n].extend(link_vector(topology, s))
                    c = composite_metric(v, k)
                    if c < cur:
                        best[r], cur, changed = v, c, True
            if not changed:
                break
        for r in sorted(topology.routers):
            m = composite_metric(best.get(r), k)
            res.metric[(r, d)] = m
            if r in attached or m == INF:
                res.next_hops[(r, d)] = frozenset()
            else:
                res.next_hops[(r, d)] = frozenset(
                    n for n, s in edges[r]
                    if n in best and composite_metric(best[n].extend(link_vector(topology, s)), k) == m
                )
    return res


def shortest_paths(topology: Topology, algebra: str = SUBNET_HOPS, cap: float = INF, k=DEFAULT_K) -> OracleResult:
    """Exact shortest metrics for every (router, destination) pair.

    ``cap`` turns metrics at or above it into the infinity sentinel (16 for
    the RIP family).
    """
    if algebra == COMPOSITE:
        return _composite_paths(topology, k)
    if algebra not in (SUBNET_HOPS, ROUTER_HOPS, ROUTER_COST):
        raise ValueError(f"unknown metric algebra {algebra!r}")
    return _scalar_paths(topology, algebra, cap)


def final_topology(topology: Topology, trace: Trace) -> Topology:
    t = topology.copy()
    for s, up in trace.final_links.items():
        t.set_link(s, up)
    return t


# -- loops -------------------------------------------------------------------


def _usable(row: Row | None, router: str, infinity: float) -> bool:
    return row is not None and row.metric < infinity and row.next_hop not in (None, router)


def detect_loops(snapshot: dict[str, dict[str, Row]], infinity: float = INF) -> list[tuple[str, frozenset[str]]]:
    """Cycles in the per-destination next-hop graph, as (destination, members)."""
    dests = sorted({d for table in snapshot.values() for d in table})
    found = []
    for d in dests:
        state: dict[str, int] = {}  # 1 on stack, 2 finished
        for start in sorted(snapshot):
            if start in state:
                continue
            path = []
            u = start
            while u is not None and u not in state:
                state[u] = 1
                path.append(u)
                row = snapshot.get(u, {}).get(d)
                u = row.next_hop if _usable(row, u, infinity) else None
            if u is not None and state.get(u) == 1:
                found.append((d, frozenset(path[path.index(u):])))
            for p in path:
                state[p] = 2
    return found


@dataclass
class LoopEpisode:
    destination: str
    routers: frozenset[str]
    start: int
    end: int
    peak_metric: float

    def as_dict(self) -> dict:
        return {
            "destination": self.destination,
            "routers": sorted(self.routers),
            "start": self.start,
            "end": self.end,
            "peak_metric": self.peak_metric,
        }


def _same(a: dict, b: dict) -> bool:
    return a.keys() == b.keys() and all(a[r] is b[r] for r in a)


def per_tick(trace: Trace, check: Callable[[dict], list]) -> Iterable[tuple[int, list]]:
    """Run ``check`` on every snapshot, reusing the result for unchanged ticks."""
    prev, result = None, []
    for t, snap in enumerate(trace.snapshots):
        if prev is None or not _same(prev, snap):
            result = check(snap)
        prev = snap
        yield t, result


def loop_episodes(trace: Trace, infinity: float = INF) -> list[LoopEpisode]:
    open_: dict[tuple[str, frozenset], LoopEpisode] = {}
    closed: list[LoopEpisode] = []
    for t, loops in per_tick(trace, lambda s: detect_loops(s, infinity)):
        snap = trace.snapshots[t]
        keys = set(loops)
        for key in list(open_):
            if key not in keys:
                closed.append(open_.pop(key))
        for d, members in loops:
            peak = max(snap[r][d].metric for r in members)
            ep = open_.get((d, members))
            if ep is None:
                open_[(d, members)] = LoopEpisode(d, members, t, t, peak)
            else:
                ep.end = t
                ep.peak_metric = max(ep.peak_metric, peak)
    closed.extend(open_.values())
    closed.sort(key=lambda e: (e.start, e.destination, sorted(e.routers)))
    return closed


# -- convergence -------------------------------------------------------------


def mismatches(
    snapshot: dict[str, dict[str, Row]],
    oracle: OracleResult,
    infinity: float = INF,
    reactive: bool = False,
) -> list[tuple[str, str, float, float]]:
    """(router, destination, expected, got) for every row off the oracle.

    ``reactive`` protocols only keep routes on demand, so a missing or
    invalid row is fine; any usable row must still carry the oracle metric.
    """
    out = []
    for (r, d), expected in sorted(oracle.metric.items()):
        if oracle.algebra in (ROUTER_HOPS, ROUTER_COST) and r == d:
            continue
        row = snapshot.get(r, {}).get(d)
        got = row.metric if row is not None and row.metric < infinity else INF
        if expected >= infinity:
            expected = INF
        if reactive and got == INF:
            continue
        if got != expected:
            out.append((r, d, expected, got))
    return out


def convergence_tick(
    trace: Trace,
    oracle: OracleResult,
    infinity: float = INF,
    reactive: bool = False,
    extra: Callable[[dict], list] | None = None,
) -> int | None:
    """First tick from which every table matches the oracle until the horizon."""

    def ok(snap) -> list:
        bad = mismatches(snap, oracle, infinity, reactive)
        if not bad and extra is not None:
            bad = extra(snap)
        return bad

    first = None
    for t, bad in per_tick(trace, ok):
        if bad:
            first = None
        elif first is None:
            first = t
    return first


# -- protocol invariants -----------------------------------------------------


def aodv_violations(snapshot: dict[str, dict[str, Row]]) -> list[str]:
    """Fresher-or-shorter rule along every valid next-hop pointer."""
    from .protocols.aodv import seq_gt

    out = []
    for r in sorted(snapshot):
        for d, row in sorted(snapshot[r].items()):
            if row.metric == INF or row.next_hop in (None, d):
                continue
            n = row.next_hop
            nrow = snapshot.get(n, {}).get(d)
            if nrow is None or nrow.metric == INF:
                continue
            s_r, s_n = row.get("seq"), nrow.get("seq")
            if not (seq_gt(s_n, s_r) or (s_n == s_r and nrow.metric < row.metric)):
                out.append(f"{r}->{n} for {d}: ({s_r},{row.metric}) vs ({s_n},{nrow.metric})")
    return out


def eigrp_violations(snapshot: dict[str, dict[str, Row]], max_fs: int = 4) -> list[str]:
    """Feasible distance must drop strictly along every successor pointer."""
    out = []
    for r in sorted(snapshot):
        for d, row in sorted(snapshot[r].items()):
            if row.get("fs", 0) > max_fs:
                out.append(f"{r} has {row.get('fs')} feasible successors for {d}")
            k = row.next_hop
            if row.metric == INF or k in (None, r):
                continue
            krow = snapshot.get(k, {}).get(d)
            if krow is None:
                out.append(f"{r}->{k} for {d}: successor has no entry")
            elif not krow.get("fd") < row.get("fd"):
                out.append(f"{r}->{k} for {d}: FD {row.get('fd')} not above {krow.get('fd')}")
    return out


def babel_violations(snapshot: dict[str, dict[str, Row]]) -> list[str]:
    """Feasibility distance of the next hop must be strictly better."""
    from .protocols.babel import better

    out = []
    for r in sorted(snapshot):
        for d, row in sorted(snapshot[r].items()):
            k = row.next_hop
            if row.metric == INF or k in (None, r):
                continue
            krow = snapshot.get(k, {}).get(d)
            if krow is None:
                out.append(f"{r}->{k} for {d}: next hop has no entry")
                continue
            mine = (row.get("fd_seq"), row.get("fd_metric"))
            theirs = (krow.get("fd_seq"), krow.get("fd_metric"))
            if not better(theirs, mine):
                out.append(f"{r}->{k} for {d}: FD {theirs} not better than {mine}")
    return out


# -- simple loops ------------------------------------------------------------


def simple_loop_metrics(topology: Topology, router: str) -> dict[tuple[str, str], int]:
    """Exhaustive minimum simple-loop hop counts between interface pairs.

    A simple loop leaves ``router`` on interface A, visits other routers at
    most once and comes back on interface B != A. Exponential, for small
    graphs only.
    """
    edges = _edges(topology)
    out: dict[tuple[str, str], int] = {}
    for s_out in topology.attached(router):
        if not topology.is_up(s_out):
            continue
        a = topology.interface_on(router, s_out)
        for first in topology.routers_on(s_out):
            if first == router:
                continue
            stack = [(first, (first,))]
            while stack:
                u, seen = stack.pop()
                for v, s in edges[u]:
                    if v == router:
                        b = topology.interface_on(router, s)
                        if b != a:
                            length = len(seen) + 1
                            if length < out.get((a, b), INF):
                                out[(a, b)] = length
                    elif v not in seen:
                        stack.append((v, seen + (v,)))
    return out


def min_return_metrics(msilm: dict[tuple[str, str], int]) -> dict[str, int]:
    out: dict[str, int] = {}
    for (a, b), m in msilm.items():
        out[a] = min(out.get(a, INF), m)
    return out


def relabel(topology: Topology, mapping: dict[str, str]) -> Topology:
    """Same network with routers renamed; interface names are kept."""
    routers = {mapping[r]: ifs for r, ifs in topology.routers.items()}
    t = Topology(routers, topology.con, topology.subnets, topology.attrs)
    t.link_state = dict(topology.link_state)
    return t


__all__ = [
    "SUBNET_HOPS",
    "ROUTER_HOPS",
    "ROUTER_COST",
    "COMPOSITE",
    "OracleResult",
    "LoopEpisode",
    "shortest_paths",
    "final_topology",
    "detect_loops",
    "loop_episodes",
    "mismatches",
    "convergence_tick",
    "aodv_violations",
    "eigrp_violations",
    "babel_violations",
    "simple_loop_metrics",
    "min_return_metrics",
    "relabel",
    "per_tick",
]

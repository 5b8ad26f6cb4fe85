"""Deterministic discrete-event engine.

Events run in ``(time, seq)`` order, ``seq`` being assigned at enqueue.
In synchronous mode every router additionally gets an ``on_round`` call
at the end of each tick; messages always take at least one tick, so a
round's output only depends on the previous round's input.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .protocols.base import INF, CancelTimer, Note, Protocol, Row, Send, Timer
from .topology import Topology, TopologyError

SYNCHRONOUS = "synchronous"
ASYNCHRONOUS = "asynchronous"

DELIVER = "deliver"
TIMER = "timer"
LINK = "link_change"
ROUTER = "router_change"
LATENCY = "latency"
DATA = "data"


@dataclass(frozen=True, order=True)
class SimEvent:
    time: int
    seq: int
    kind: str = field(compare=False)
    payload: tuple = field(compare=False, default=())


@dataclass(frozen=True)
class ScriptEvent:
    """A scripted event before sequencing: ``link_change('n', False)`` etc."""

    time: int
    kind: str
    args: tuple


def link_change(time: int, subnet: str, up: bool) -> ScriptEvent:
    return ScriptEvent(time, LINK, (subnet, up))


def router_change(time: int, router: str, up: bool) -> ScriptEvent:
    return ScriptEvent(time, ROUTER, (router, up))


def latency_change(time: int, subnet: str, delay: int) -> ScriptEvent:
    return ScriptEvent(time, LATENCY, (subnet, delay))


def send_data(time: int, source: str, destination: str) -> ScriptEvent:
    return ScriptEvent(time, DATA, (source, destination))


@dataclass
class Trace:
    """Everything observed during a run.

    ``snapshots[t]`` maps router -> destination -> :class:`Row` after every
    event of tick ``t`` has run. Unchanged router tables share one dict
    object between consecutive ticks.
    """

    protocol: str
    mode: str
    horizon: int
    seed: int
    snapshots: list[dict[str, dict[str, Row]]] = field(default_factory=list)
    sent: list[Counter] = field(default_factory=list)
    dropped: Counter = field(default_factory=Counter)
    notes: list[tuple[int, str, str]] = field(default_factory=list)
    link_history: list[tuple[int, str, bool]] = field(default_factory=list)
    initial_links: dict[str, bool] = field(default_factory=dict)
    final_links: dict[str, bool] = field(default_factory=dict)
    counters: dict[str, dict[str, int]] = field(default_factory=dict)

    def totals(self) -> Counter:
        out = Counter()
        for c in self.sent:
            out.update(c)
        return out

    def links_at(self, tick: int) -> dict[str, bool]:
        state = dict(self.initial_links)
        for t, s, up in self.link_history:
            if t > tick:
                break
            state[s] = up
        return state

    def rows(self) -> Iterable[tuple[int, str, str, Row | None]]:
        """Changed rows per tick; ``None`` marks a row that disappeared."""
        prev: dict[str, dict[str, Row]] = {}
        for t, snap in enumerate(self.snapshots):
            for r in sorted(snap):
                table = snap[r]
                old = prev.get(r, {})
                if table is old:
                    continue
                for d in sorted(set(table) | set(old)):
                    new = table.get(d)
                    if new != old.get(d):
                        yield t, r, d, new
            prev = snap


TRACE_COLUMNS = ("tick", "router", "destination", "metric", "next_hop", "annotations")


def format_metric(m: float) -> str:
    if m == INF:
        return "inf"
    if float(m).is_integer():
        return str(int(m))
    return repr(m)


def trace_lines(trace: Trace) -> list[str]:
    """Comma-delimited trace, one line per changed routing-table row."""
    lines = [",".join(TRACE_COLUMNS)]
    for t, r, d, row in trace.rows():
        if row is None:
            lines.append(f"{t},{r},{d},-,-,removed")
            continue
        extra = ";".join(f"{k}={v}" for k, v in row.extra)
        nh = row.next_hop if row.next_hop is not None else "-"
        lines.append(f"{t},{r},{d},{format_metric(row.metric)},{nh},{extra}")
    return lines


def write_trace(trace: Trace, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(trace_lines(trace)) + "\n")


class Engine:
    """One simulation instance. Single threaded; build a new one per run."""

    def __init__(
        self,
        topology: Topology,
        factory: Callable[[str, Topology], Protocol],
        mode: str = ASYNCHRONOUS,
        seed: int = 0,
    ):
        if mode not in (SYNCHRONOUS, ASYNCHRONOUS):
            raise ValueError(f"unknown mode {mode!r}")
        self.topo = topology.copy()
        self.initial_links = dict(self.topo.link_state)
        self.mode = mode
        self.seed = seed
        self.rng = random.Random(seed)
        self.factory = factory
        self.latency: dict[str, int] = {}
        self.loss: dict[str, float] = {}
        self.loss_kinds: set[str] | None = None
        self.now = 0
        self._queue: list[SimEvent] = []
        self._seq = 0
        self._timer_gen: dict[tuple[str, Any], int] = {}
        self.nodes: dict[str, Protocol] = {}

    # -- configuration -----------------------------------------------------

    def set_latency(self, subnet: str, delay: int) -> None:
        self.topo.check_subnet(subnet)
        if int(delay) != delay or delay < 1:
            raise ValueError(f"latency must be a positive integer tick count, got {delay!r}")
        self.latency[subnet] = int(delay)

    def set_loss(self, probability: float, subnets: Iterable[str] | None = None, kinds: Iterable[str] | None = None) -> None:
        if not 0.0 <= probability <= 1.0:
            raise ValueError("loss probability must lie in [0, 1]")
        for s in subnets if subnets is not None else self.topo.subnets:
            self.topo.check_subnet(s)
            self.loss[s] = probability
        self.loss_kinds = set(kinds) if kinds is not None else None

    # -- queue -------------------------------------------------------------

    def _push(self, time: int, kind: str, payload: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._queue, SimEvent(time, self._seq, kind, payload))

    def _check_script(self, ev: ScriptEvent, horizon: int) -> None:
        if ev.time < 0 or ev.time > horizon:
            raise ValueError(f"scripted event at {ev.time} outside [0, {horizon}]")
        if ev.kind in (LINK, LATENCY):
            self.topo.check_subnet(ev.args[0])
        elif ev.kind == ROUTER:
            if ev.args[0] not in self.topo.routers:
                raise TopologyError(f"unknown router {ev.args[0]!r}")
        elif ev.kind == DATA:
            for r in ev.args:
                if r not in self.topo.routers:
                    raise TopologyError(f"unknown router {r!r}")
        else:
            raise ValueError(f"unknown scripted event kind {ev.kind!r}")
        if ev.kind == LATENCY and (int(ev.args[1]) != ev.args[1] or ev.args[1] < 1):
            raise ValueError("latency must be a positive integer tick count")

    # -- effects -----------------------------------------------------------

    def _call(self, router: str, handler: str, *args) -> None:
        node = self.nodes[router]
        node.now = self.now
        getattr(node, handler)(*args)
        self._dirty.add(router)
        for eff in node.drain():
            self._apply(router, eff)

    def _apply(self, router: str, eff) -> None:
        if isinstance(eff, Send):
            self._send(router, eff)
        elif isinstance(eff, Timer):
            key = (router, eff.tag)
            gen = self._timer_gen.get(key, 0) + 1
            self._timer_gen[key] = gen
            self._push(self.now + max(1, int(eff.delay)), TIMER, (router, eff.tag, gen))
        elif isinstance(eff, CancelTimer):
            key = (router, eff.tag)
            self._timer_gen[key] = self._timer_gen.get(key, 0) + 1
        elif isinstance(eff, Note):
            self._trace.notes.append((self.now, router, eff.text))
        else:
            raise TypeError(f"unknown effect {eff!r}")

    def _send(self, router: str, eff: Send) -> None:
        kind = getattr(eff.message, "kind", type(eff.message).__name__)
        self._sent_now[kind] += 1
        s = eff.subnet
        if router not in self.topo.routers_on(s):
            raise TopologyError(f"{router} is not attached to {s}")
        if not self.topo.is_up(s):
            self._trace.dropped[f"{kind}:link-down"] += 1
            return
        targets = [r for r in self.topo.routers_on(s) if r != router]
        if eff.to is not None:
            if eff.to not in targets:
                self._trace.dropped[f"{kind}:no-such-neighbor"] += 1
                return
            targets = [eff.to]
        delay = self.latency.get(s, 1)
        p = self.loss.get(s, 0.0)
        lossy = p > 0 and (self.loss_kinds is None or kind in self.loss_kinds)
        for t in targets:
            if lossy and self.rng.random() < p:
                self._trace.dropped[f"{kind}:loss"] += 1
                continue
            self._push(self.now + delay, DELIVER, (eff.message, router, s, t))

    def _set_link(self, subnet: str, up: bool) -> None:
        if self.topo.is_up(subnet) == up:
            return
        self.topo.set_link(subnet, up)
        self._trace.link_history.append((self.now, subnet, up))
        members = self.topo.routers_on(subnet)
        for r in members:
            self._call(r, "on_link", subnet, up)
        for r in members:
            for other in members:
                if other != r:
                    self._call(r, "on_neighbor", other, subnet, up)

    # -- main loop ---------------------------------------------------------

    def _dispatch(self, ev: SimEvent) -> None:
        if ev.kind == DELIVER:
            msg, sender, s, target = ev.payload
            if not self.topo.is_up(s):
                kind = getattr(msg, "kind", type(msg).__name__)
                self._trace.dropped[f"{kind}:link-down"] += 1
                return
            self._call(target, "on_message", msg, sender, s)
        elif ev.kind == TIMER:
            router, tag, gen = ev.payload
            if self._timer_gen.get((router, tag)) == gen:
                self._call(router, "on_timer", tag)
        elif ev.kind == LINK:
            self._set_link(*ev.payload)
        elif ev.kind == ROUTER:
            router, up = ev.payload
            for s in self.topo.attached(router):
                self._set_link(s, up)
        elif ev.kind == LATENCY:
            self.set_latency(*ev.payload)
        elif ev.kind == DATA:
            src, dst = ev.payload
            self._call(src, "on_data", dst)

    def run(self, script: Iterable[ScriptEvent] = (), horizon: int = 100) -> Trace:
        if horizon < 0:
            raise ValueError("horizon must be non-negative")
        script = sorted(script, key=lambda e: e.time)
        for ev in script:
            self._check_script(ev, horizon)
        proto_name = "base"
        self._trace = trace = Trace(proto_name, self.mode, horizon, self.seed)
        trace.initial_links = dict(self.initial_links)
        for ev in script:
            self._push(ev.time, ev.kind, ev.args)
        self._dirty: set[str] = set()
        self._sent_now: Counter = Counter()
        for r in sorted(self.topo.routers):
            node = self.nodes[r] = self.factory(r, self.topo)
            node.synchronous = node.synchronous or self.mode == SYNCHRONOUS
        trace.protocol = next(iter(self.nodes.values())).name if self.nodes else proto_name
        self.now = 0
        for r in sorted(self.nodes):
            self._call(r, "start")
        tables: dict[str, dict[str, Row]] = {}
        for tick in range(horizon + 1):
            self.now = tick
            while self._queue and self._queue[0].time == tick:
                self._dispatch(heapq.heappop(self._queue))
            if self.mode == SYNCHRONOUS:
                for r in sorted(self.nodes):
                    self._call(r, "on_round")
            if self._dirty or not trace.snapshots:
                tables = dict(tables)
                for r in sorted(self._dirty) if trace.snapshots else sorted(self.nodes):
                    new = self.nodes[r].table()
                    if new != tables.get(r):
                        tables[r] = new
                self._dirty = set()
            trace.snapshots.append(tables)
            trace.sent.append(self._sent_now)
            self._sent_now = Counter()
        trace.final_links = dict(self.topo.link_state)
        trace.counters = {r: dict(n.counters) for r, n in sorted(self.nodes.items())}
        return trace


def run(
    topology: Topology,
    factory: Callable[[str, Topology], Protocol],
    script: Iterable[ScriptEvent] = (),
    mode: str = ASYNCHRONOUS,
    horizon: int = 100,
    seed: int = 0,
    latency: dict[str, int] | None = None,
    loss: float = 0.0,
    loss_kinds: Iterable[str] | None = None,
) -> Trace:
    eng = Engine(topology, factory, mode=mode, seed=seed)
    for s, d in (latency or {}).items():
        eng.set_latency(s, d)
    if loss:
        eng.set_loss(loss, kinds=loss_kinds)
    return eng.run(script, horizon)

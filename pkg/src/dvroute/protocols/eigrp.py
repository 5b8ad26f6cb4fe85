"""DUAL with feasible distances, query/reply diffusion and the composite metric."""

from __future__ import annotations

from dataclasses import dataclass, field

from .base import INF, Protocol, Row

PASSIVE = "passive"
ACTIVE = "active"
MAX_HOPS = 100
MAX_FEASIBLE_SUCCESSORS = 4
DEFAULT_K = (1, 0, 1, 0, 0)


@dataclass(frozen=True)
class VectorMetric:
    bandwidth: float
    delay: float
    load: int = 1
    reliability: int = 255
    hop_count: int = 0

    def extend(self, link: "VectorMetric") -> "VectorMetric":
        """Path vector after one more hop over ``link``."""
        return VectorMetric(
            max(self.bandwidth, link.bandwidth),
            self.delay + link.delay,
            max(self.load, link.load),
            min(self.reliability, link.reliability),
            self.hop_count + 1,
        )


def composite_metric(v: VectorMetric | None, k=DEFAULT_K) -> float:
    if v is None or v.hop_count > MAX_HOPS:
        return INF
    k1, k2, k3, k4, k5 = k
    if v.load >= 256:
        raise ValueError("load must be below 256")
    m = k1 * v.bandwidth + k3 * v.delay
    if k2:
        m += k2 * v.bandwidth / (256 - v.load)
    if k5:
        m = m * k5 / (k4 + v.reliability)
    return m * 256


def link_vector(topology, subnet: str) -> VectorMetric:
    a = topology.attrs.get(subnet, {})
    return VectorMetric(
        a.get("bandwidth", 100),
        a.get("delay", 1),
        int(a.get("load", 1)),
        int(a.get("reliability", 255)),
        0,
    )


@dataclass(frozen=True)
class EigrpPacket:
    kind: str  # UPDATE, QUERY or REPLY
    entries: tuple[tuple[str, VectorMetric | None], ...]


@dataclass
class DualEntry:
    destination: str
    state: str = PASSIVE
    distance: float = INF
    feasible_distance: float = INF
    successor: str | None = None
    vector: VectorMetric | None = None
    reported: dict[str, VectorMetric | None] = field(default_factory=dict)
    pending_replies: set[str] = field(default_factory=set)
    feasible_successors: list[str] = field(default_factory=list)
    query_distance: float = INF
    query_vector: VectorMetric | None = None
    deferred: set[str] = field(default_factory=set)


class Eigrp(Protocol):
    name = "eigrp"
    defaults = {"k": DEFAULT_K}

    def __init__(self, router, topology, params=None):
        super().__init__(router, topology, params)
        self.k = tuple(self.params["k"])
        if len(self.k) != 5:
            raise ValueError("K must have five coefficients")
        self.entries: dict[str, DualEntry] = {}
        self._links = {s: link_vector(topology, s) for s in topology.attached(router)}
        self._out: dict[tuple[str, str], dict[str, VectorMetric | None]] = {}

    # -- metric helpers ----------------------------------------------------

    def metric(self, v: VectorMetric | None) -> float:
        return composite_metric(v, self.k)

    def _entry(self, dest: str) -> DualEntry:
        e = self.entries.get(dest)
        if e is None:
            e = self.entries[dest] = DualEntry(dest)
        return e

    def _own_vector(self, dest: str) -> VectorMetric | None:
        if dest in self._links and self.topo.is_up(dest):
            return self._links[dest]
        return None

    def _via(self, e: DualEntry, k: str) -> VectorMetric | None:
        rv = e.reported.get(k)
        s = self.link_to(k)
        if rv is None or s is None:
            return None
        v = rv.extend(self._links[s])
        return v if v.hop_count <= MAX_HOPS else None

    def _candidates(self, e: DualEntry) -> dict[str, tuple[float, VectorMetric]]:
        out = {}
        for k in self.live_neighbors():
            v = self._via(e, k)
            if v is not None:
                out[k] = (self.metric(v), v)
        return out

    def _feasible(self, e: DualEntry) -> list[str]:
        cands = self._candidates(e)
        fs = [k for k in cands if k != e.successor and self.metric(e.reported[k]) < e.feasible_distance]
        fs.sort(key=lambda k: (cands[k][0], k))
        return fs[:MAX_FEASIBLE_SUCCESSORS]

    # -- outgoing ----------------------------------------------------------

    def _queue(self, neighbor: str, kind: str, dest: str, vector: VectorMetric | None) -> None:
        self._out.setdefault((neighbor, kind), {})[dest] = vector

    def _advertised(self, e: DualEntry, to: str) -> VectorMetric | None:
        # an active router offers no path: its frozen route may lead back here
        if to == e.successor or e.state == ACTIVE:
            return None
        return e.vector

    def _flush(self) -> None:
        for (n, kind), entries in sorted(self._out.items()):
            self.send_to(n, EigrpPacket(kind, tuple(sorted(entries.items(), key=lambda x: x[0]))))
        self._out = {}

    # -- DUAL --------------------------------------------------------------

    def local_compute(self, dest: str) -> None:
        e = self._entry(dest)
        if e.state != PASSIVE:
            return
        own = self._own_vector(dest)
        if own is not None:
            self._settle(e, self.router, own)
            return
        cands = self._candidates(e)
        if not cands:
            if e.distance == INF and e.successor is None:
                return
            self.go_active(e)
            return
        best = min(c[0] for c in cands.values())
        tied = sorted(k for k, c in cands.items() if c[0] == best)
        feasible = [k for k in tied if self.metric(e.reported[k]) < e.feasible_distance]
        if not feasible:
            self.go_active(e)
            return
        k = e.successor if e.successor in feasible else feasible[0]
        self._settle(e, k, cands[k][1])

    def _settle(self, e: DualEntry, successor: str, vector: VectorMetric) -> None:
        d = self.metric(vector)
        changed = d != e.distance or successor != e.successor or vector != e.vector
        e.distance, e.successor, e.vector = d, successor, vector
        e.feasible_distance = min(e.feasible_distance, d)
        e.feasible_successors = self._feasible(e)
        if changed:
            for n in self.live_neighbors():
                self._queue(n, "UPDATE", e.destination, self._advertised(e, n))

    def go_active(self, e: DualEntry) -> None:
        if e.successor == self.router:
            e.successor = None
        v = self._via(e, e.successor) if e.successor is not None else None
        e.state = ACTIVE
        e.query_vector = v
        e.query_distance = self.metric(v)
        # neighbors will only ever have heard distances >= the query value
        e.feasible_distance = min(e.feasible_distance, e.query_distance)
        self.note(f"active {e.destination}")
        self._query_all(e)

    def _query_all(self, e: DualEntry) -> None:
        e.pending_replies = set(self.live_neighbors())
        if not e.pending_replies:
            self._finish(e)
            return
        self.count("diffusions")
        for n in sorted(e.pending_replies):
            self._queue(n, "QUERY", e.destination, None if n == e.successor else e.query_vector)

    def _finish(self, e: DualEntry) -> None:
        own = self._own_vector(e.destination)
        best = (self.router, own) if own is not None else None
        if best is None:
            cands = self._candidates(e)
            if cands:
                k = min(cands, key=lambda n: (cands[n][0], n))
                best = (k, cands[k][1])
        d = self.metric(best[1]) if best else INF
        if d > e.query_distance and self.live_neighbors():
            # upstream routers sized their feasible distance on the old query
            e.query_vector = best[1] if best else None
            e.query_distance = d
            self._query_all(e)
            return
        e.state = PASSIVE
        e.query_vector, e.query_distance = None, INF
        self.note(f"passive {e.destination}")
        if best is None:
            e.distance, e.feasible_distance, e.successor, e.vector = INF, INF, None, None
            e.feasible_successors = []
        else:
            e.successor, e.vector, e.distance = best[0], best[1], d
            e.feasible_distance = d
            e.feasible_successors = self._feasible(e)
        for n in self.live_neighbors():
            self._queue(n, "UPDATE", e.destination, self._advertised(e, n))
        for n in sorted(e.deferred):
            if self.link_to(n) is not None:
                self._queue(n, "REPLY", e.destination, self._advertised(e, n))
        e.deferred = set()

    def handle_update(self, dest: str, sender: str, vector: VectorMetric | None) -> None:
        e = self._entry(dest)
        e.reported[sender] = vector
        if e.state == PASSIVE:
            self.local_compute(dest)
        else:
            e.feasible_successors = self._feasible(e)

    def handle_query(self, dest: str, sender: str, vector: VectorMetric | None) -> None:
        e = self._entry(dest)
        e.reported[sender] = vector
        was_successor = sender == e.successor
        if e.state == PASSIVE:
            self.local_compute(dest)
        if e.state == PASSIVE:
            self._queue(sender, "REPLY", dest, self._advertised(e, sender))
        elif was_successor:
            e.deferred.add(sender)
        else:
            self._queue(sender, "REPLY", dest, self._advertised(e, sender))

    def handle_reply(self, dest: str, sender: str, vector: VectorMetric | None) -> None:
        e = self._entry(dest)
        if e.state != ACTIVE or sender not in e.pending_replies:
            self.count("reply-unexpected")
            return
        e.reported[sender] = vector
        e.pending_replies.discard(sender)
        if not e.pending_replies:
            self._finish(e)

    # -- handlers ----------------------------------------------------------

    def start(self) -> None:
        for s in self.topo.attached(self.router):
            if self.topo.is_up(s):
                self.local_compute(s)
        self._flush()

    def on_message(self, msg, sender, subnet) -> None:
        if not isinstance(msg, EigrpPacket):
            self.count("unexpected-message")
            return
        handler = {"UPDATE": self.handle_update, "QUERY": self.handle_query, "REPLY": self.handle_reply}[msg.kind]
        for dest, vector in msg.entries:
            handler(dest, sender, vector)
        self._flush()

    def on_link(self, subnet, up) -> None:
        # an active entry picks up its own subnet when the diffusion ends
        self.local_compute(subnet)
        self._flush()

    def on_neighbor(self, neighbor, subnet, up) -> None:
        if up:
            for d in sorted(self.entries):
                e = self.entries[d]
                if e.state == PASSIVE and e.vector is not None:
                    self._queue(neighbor, "UPDATE", d, self._advertised(e, neighbor))
            self._flush()
            return
        if self.link_to(neighbor) is not None:
            return
        for d in sorted(self.entries):
            e = self.entries[d]
            e.reported.pop(neighbor, None)
            e.deferred.discard(neighbor)
            if e.state == ACTIVE:
                if e.successor == neighbor:
                    e.successor = None
                if neighbor in e.pending_replies:
                    e.pending_replies.discard(neighbor)
                    if not e.pending_replies:
                        self._finish(e)
            elif e.successor == neighbor:
                self.local_compute(d)
            else:
                e.feasible_successors = self._feasible(e)
        self._flush()

    def table(self) -> dict[str, Row]:
        out = {}
        for d, e in self.entries.items():
            if e.distance == INF and e.state == PASSIVE:
                continue
            metric = e.distance if e.successor is not None else INF
            out[d] = Row(
                metric,
                e.successor,
                (("fd", e.feasible_distance), ("state", e.state), ("fs", len(e.feasible_successors))),
            )
        return out

"""Babel core: sequenced distances, feasibility, starvation and seqno requests."""

from __future__ import annotations

from dataclasses import dataclass, field

from .base import INF, Protocol, Row

SEQ_MOD = 2**16


def seq_gt(a: int, b: int) -> bool:
    d = (a - b) % SEQ_MOD
    return 0 < d < SEQ_MOD // 2


def seq_ge(a: int, b: int) -> bool:
    return a == b or seq_gt(a, b)


@dataclass(frozen=True)
class SequencedDistance:
    seqno: int
    metric: float

    def better_than(self, other: "SequencedDistance | None") -> bool:
        return better(self, other)


def _pair(d) -> tuple[int, float] | None:
    if d is None:
        return None
    if isinstance(d, SequencedDistance):
        return d.seqno, d.metric
    return d[0], d[1]


def better(a, b) -> bool:
    """``a`` strictly better than ``b``: newer seqno, or same seqno and smaller metric."""
    a, b = _pair(a), _pair(b)
    if a is None or a[0] is None:
        return False
    if b is None or b[0] is None:
        return True
    return seq_gt(a[0], b[0]) or (a[0] == b[0] and a[1] < b[1])


def is_feasible(fd: SequencedDistance | None, update: SequencedDistance) -> bool:
    """An update is feasible when it is better than the feasibility distance."""
    if update.metric == INF:
        return False
    return fd is None or better(update, fd)


@dataclass(frozen=True)
class BabelUpdate:
    entries: tuple[tuple[str, int, float], ...]  # (source, seqno, metric)
    kind: str = "UPDATE"


@dataclass(frozen=True)
class SeqnoRequest:
    source: str
    seqno: int
    originator: str
    attempt: int
    hop_limit: int = 64
    kind: str = "SEQNO_REQUEST"


@dataclass
class BabelEntry:
    source: str
    fd: SequencedDistance | None = None
    next_hop: str | None = None
    distance: SequencedDistance | None = None  # selected route, metric includes our link
    heard: dict[str, SequencedDistance] = field(default_factory=dict)  # neighbor -> advertised
    pending_request: tuple[int, int] | None = None  # (requested seqno, retries left)
    attempt: int = 0


class Babel(Protocol):
    name = "babel"
    defaults = {
        "update_interval": 20,
        "request_retries": 3,
        "request_spacing": 4,
        "request_retention": 16,
        "initial_seqno": 0,
    }

    def __init__(self, router, topology, params=None):
        super().__init__(router, topology, params)
        seed = self.params["initial_seqno"]
        if isinstance(seed, dict):
            seed = seed.get(router, 0)
        self.seqno = int(seed) % SEQ_MOD
        self.entries: dict[str, BabelEntry] = {}
        self.seen_requests: dict[tuple, int] = {}
        self._changed: set[str] = set()

    # -- helpers -----------------------------------------------------------

    def cost(self, neighbor: str) -> float:
        s = self.link_to(neighbor)
        if s is None:
            return INF
        return self.topo.attrs.get(s, {}).get("cost", 1)

    def _entry(self, source: str) -> BabelEntry:
        e = self.entries.get(source)
        if e is None:
            e = self.entries[source] = BabelEntry(source)
        return e

    def advertised(self, source: str) -> tuple[int, float] | None:
        if source == self.router:
            return self.seqno, 0
        e = self.entries.get(source)
        if e is None:
            return None
        if e.distance is None:
            # retraction keeps the last seqno we knew
            s = e.fd.seqno if e.fd is not None else 0
            return s, INF
        return e.distance.seqno, e.distance.metric

    def _broadcast(self, sources) -> None:
        entries = []
        for src in sorted(sources):
            adv = self.advertised(src)
            if adv is not None:
                entries.append((src, adv[0], adv[1]))
        if entries:
            for n in self.live_neighbors():
                self.send_to(n, BabelUpdate(tuple(entries)))

    def _flush(self) -> None:
        if self._changed:
            self._broadcast(self._changed)
        self._changed = set()

    # -- route selection -----------------------------------------------------

    def select(self, source: str) -> None:
        e = self._entry(source)
        best = None
        for k in self.live_neighbors():
            adv = e.heard.get(k)
            if adv is None or not is_feasible(e.fd, adv):
                continue
            m = adv.metric + self.cost(k)
            key = (m, k != e.next_hop, k)
            if best is None or key < best[0]:
                best = (key, k, SequencedDistance(adv.seqno, m))
        old = (e.next_hop, e.distance)
        if best is None:
            e.next_hop, e.distance = None, None
            if old[1] is not None:
                self.note(f"lost feasible route to {source}")
                self._changed.add(source)
            self.handle_starvation(e)
            return
        _, k, dist = best
        e.next_hop, e.distance = k, dist
        if e.fd is None or better(dist, e.fd):
            e.fd = dist
        if e.pending_request is not None:
            e.pending_request = None
            self.cancel_timer(("request", source))
        if (k, dist) != old:
            self._changed.add(source)

    def handle_starvation(self, e: BabelEntry) -> None:
        """No feasible route: ask the source for a newer seqno if any route is known."""
        if e.fd is None or e.pending_request is not None:
            return
        if self._request_target(e, exclude=None) is None:
            return
        want = (e.fd.seqno + 1) % SEQ_MOD
        e.pending_request = (want, self.params["request_retries"])
        e.attempt = 0
        self.note(f"starved for {e.source}, requesting seqno {want}")
        self._send_request(e)

    def _request_target(self, e: BabelEntry, exclude: str | None) -> str | None:
        if e.next_hop is not None and e.next_hop != exclude:
            return e.next_hop
        options = []
        for k in self.live_neighbors():
            adv = e.heard.get(k)
            if k != exclude and adv is not None and adv.metric < INF:
                options.append((adv.metric + self.cost(k), k))
        return min(options)[1] if options else None

    def _send_request(self, e: BabelEntry) -> None:
        want, _ = e.pending_request
        k = self._request_target(e, exclude=None)
        if k is None:
            return
        e.attempt += 1
        req = SeqnoRequest(e.source, want, self.router, e.attempt)
        self.seen_requests[(req.source, req.seqno, req.originator, req.attempt)] = self.now
        self.count("requests-originated")
        self.send_to(k, req)
        self.set_timer(self.params["request_spacing"], ("request", e.source))

    def handle_seqno_request(self, req: SeqnoRequest, sender: str) -> None:
        key = (req.source, req.seqno, req.originator, req.attempt)
        horizon = self.now - self.params["request_retention"]
        if key in self.seen_requests and self.seen_requests[key] > horizon:
            self.count("request-duplicate")
            return
        self.seen_requests[key] = self.now
        if req.source == self.router:
            if seq_gt(req.seqno, self.seqno):
                self.seqno = req.seqno
                self.note(f"seqno raised to {self.seqno}")
            self._changed.add(self.router)
            return
        e = self.entries.get(req.source)
        if e is None:
            return
        if e.distance is not None and seq_ge(e.distance.seqno, req.seqno):
            self._changed.add(req.source)
            return
        if req.hop_limit <= 1:
            return
        k = self._request_target(e, exclude=sender)
        if k is None:
            return
        self.count("requests-forwarded")
        self.send_to(k, SeqnoRequest(req.source, req.seqno, req.originator, req.attempt, req.hop_limit - 1))

    # -- handlers ----------------------------------------------------------

    def start(self) -> None:
        self._broadcast([self.router])
        self.set_timer(self.params["update_interval"], "periodic")

    def on_timer(self, tag) -> None:
        if tag == "periodic":
            self._broadcast([self.router, *self.entries])
            self.set_timer(self.params["update_interval"], "periodic")
            horizon = self.now - self.params["request_retention"]
            self.seen_requests = {k: t for k, t in self.seen_requests.items() if t > horizon}
        elif isinstance(tag, tuple) and tag[0] == "request":
            e = self.entries.get(tag[1])
            if e is None or e.pending_request is None or e.distance is not None:
                return
            want, left = e.pending_request
            if left <= 0:
                e.pending_request = None
                self.count("requests-abandoned")
                return
            e.pending_request = (want, left - 1)
            self._send_request(e)
        self._flush()

    def on_message(self, msg, sender, subnet) -> None:
        if isinstance(msg, BabelUpdate):
            for src, s, m in msg.entries:
                if src == self.router:
                    continue
                e = self._entry(src)
                e.heard[sender] = SequencedDistance(s, m)
                self.select(src)
        elif isinstance(msg, SeqnoRequest):
            self.handle_seqno_request(msg, sender)
        else:
            self.count("unexpected-message")
        self._flush()

    def on_neighbor(self, neighbor, subnet, up) -> None:
        if up:
            entries = []
            for src in sorted([self.router, *self.entries]):
                adv = self.advertised(src)
                if adv is not None:
                    entries.append((src, adv[0], adv[1]))
            self.send_to(neighbor, BabelUpdate(tuple(entries)))
        elif self.link_to(neighbor) is None:
            for src in sorted(self.entries):
                e = self.entries[src]
                if e.heard.pop(neighbor, None) is not None and e.next_hop == neighbor:
                    self.select(src)
        self._flush()

    def table(self) -> dict[str, Row]:
        out = {self.router: Row(0, self.router, (("seq", self.seqno), ("fd_seq", self.seqno), ("fd_metric", 0)))}
        for src, e in self.entries.items():
            if e.fd is None:
                continue
            metric = e.distance.metric if e.distance is not None else INF
            seq = e.distance.seqno if e.distance is not None else e.fd.seqno
            out[src] = Row(metric, e.next_hop, (("seq", seq), ("fd_seq", e.fd.seqno), ("fd_metric", e.fd.metric)))
        return out

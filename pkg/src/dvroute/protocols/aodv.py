"""Reactive AODV core: RREQ flooding, reverse-path RREP, RERR and HELLO."""

from __future__ import annotations

from dataclasses import dataclass, field

from .base import INF, Protocol, Row

SEQ_MOD = 2**32


def seq_gt(a: int, b: int) -> bool:
    """Serial-number comparison, so counters may wrap to zero."""
    d = (a - b) % SEQ_MOD
    return 0 < d < SEQ_MOD // 2


def seq_ge(a: int, b: int) -> bool:
    return a == b or seq_gt(a, b)


def seq_max(a: int, b: int) -> int:
    return a if seq_ge(a, b) else b


def seq_inc(a: int) -> int:
    return (a + 1) % SEQ_MOD


@dataclass(frozen=True)
class Hello:
    seq: int
    kind: str = "HELLO"


@dataclass(frozen=True)
class Rreq:
    origin: str
    rreq_id: int
    origin_seq: int
    destination: str
    dest_seq: int | None
    hop_count: int
    kind: str = "RREQ"


@dataclass(frozen=True)
class Rrep:
    origin: str
    destination: str
    dest_seq: int
    hop_count: int
    kind: str = "RREP"


@dataclass(frozen=True)
class Rerr:
    unreachable: tuple[tuple[str, int], ...]
    kind: str = "RERR"


@dataclass(frozen=True)
class Data:
    source: str
    destination: str
    ttl: int = 64
    kind: str = "DATA"


@dataclass
class AodvRoute:
    destination: str
    hop_count: int
    next_hop: str
    dest_seq_no: int
    expires_at: int
    valid: bool = True
    precursors: set[str] = field(default_factory=set)


class Aodv(Protocol):
    name = "aodv"
    defaults = {
        "hello_interval": 1,
        "allowed_hello_loss": 2,
        "active_route_timeout": 100,
        "rreq_retention": 30,
        "rreq_wait": 10,
        "rreq_retries": 2,
    }

    def __init__(self, router, topology, params=None):
        super().__init__(router, topology, params)
        self.seq = 0
        self.rreq_id = 0
        self.routes: dict[str, AodvRoute] = {}
        self.seen: dict[tuple[str, int], int] = {}
        self.last_hello: dict[str, int] = {}
        self.buffered: dict[str, int] = {}
        self.discovery: dict[str, tuple[int, int]] = {}  # dest -> (sent at, attempts)

    # -- route bookkeeping ------------------------------------------------

    def valid_route(self, dest: str) -> AodvRoute | None:
        r = self.routes.get(dest)
        return r if r is not None and r.valid else None

    def _offer(self, dest: str, seq: int, hops: int, next_hop: str) -> bool:
        """Install a route if it is fresher, or equally fresh and shorter."""
        if dest == self.router:
            return False
        r = self.routes.get(dest)
        take = (
            r is None
            or seq_gt(seq, r.dest_seq_no)
            or (seq == r.dest_seq_no and (not r.valid or hops < r.hop_count))
        )
        if not take:
            return False
        expires = self.now + self.params["active_route_timeout"]
        if r is None:
            self.routes[dest] = AodvRoute(dest, hops, next_hop, seq, expires)
        else:
            r.hop_count, r.next_hop, r.dest_seq_no = hops, next_hop, seq
            r.expires_at, r.valid = expires, True
        return True

    def _invalidate(self, r: AodvRoute, seq: int | None = None) -> None:
        r.valid = False
        r.dest_seq_no = seq_inc(r.dest_seq_no) if seq is None else seq_max(r.dest_seq_no, seq)

    # -- operations -------------------------------------------------------

    def originate_rreq(self, dest: str) -> bool:
        if self.valid_route(dest) is not None:
            return False
        self.seq = seq_inc(self.seq)
        self.rreq_id = (self.rreq_id + 1) % SEQ_MOD
        self.seen[(self.router, self.rreq_id)] = self.now
        known = self.routes.get(dest)
        msg = Rreq(self.router, self.rreq_id, self.seq, dest, known.dest_seq_no if known else None, 0)
        self.broadcast(msg)
        attempts = self.discovery.get(dest, (0, 0))[1] + 1
        self.discovery[dest] = (self.now, attempts)
        self.set_timer(self.params["rreq_wait"], ("rreq", dest))
        return True

    def handle_rreq(self, msg: Rreq, sender: str) -> None:
        key = (msg.origin, msg.rreq_id)
        if msg.origin == self.router or key in self.seen:
            self.count("rreq-duplicate")
            return
        self.seen[key] = self.now
        hops = msg.hop_count + 1
        self._offer(msg.origin, msg.origin_seq, hops, sender)
        back = self.valid_route(msg.origin)
        if back is None:
            return
        if msg.destination == self.router:
            if msg.dest_seq is not None:
                self.seq = seq_max(self.seq, msg.dest_seq)
            self.send_to(back.next_hop, Rrep(msg.origin, self.router, self.seq, 0))
            return
        fwd = self.valid_route(msg.destination)
        if fwd is not None and msg.dest_seq is not None and seq_ge(fwd.dest_seq_no, msg.dest_seq):
            fwd.precursors.add(back.next_hop)
            back.precursors.add(fwd.next_hop)
            self.count("rrep-intermediate")
            self.send_to(back.next_hop, Rrep(msg.origin, msg.destination, fwd.dest_seq_no, fwd.hop_count))
            return
        self.broadcast(Rreq(msg.origin, msg.rreq_id, msg.origin_seq, msg.destination, msg.dest_seq, hops))

    def handle_rrep(self, msg: Rrep, sender: str) -> None:
        self._offer(msg.destination, msg.dest_seq, msg.hop_count + 1, sender)
        fwd = self.valid_route(msg.destination)
        if msg.origin == self.router:
            self.discovery.pop(msg.destination, None)
            self.cancel_timer(("rreq", msg.destination))
            self._flush_data(msg.destination)
            return
        back = self.valid_route(msg.origin)
        if back is None or fwd is None:
            self.count("rrep-dropped")
            return
        fwd.precursors.add(back.next_hop)
        back.precursors.add(fwd.next_hop)
        self.send_to(back.next_hop, Rrep(msg.origin, msg.destination, fwd.dest_seq_no, fwd.hop_count))

    def handle_link_break(self, lost: str) -> None:
        self.last_hello.pop(lost, None)
        affected = []
        for d in sorted(self.routes):
            r = self.routes[d]
            if r.valid and r.next_hop == lost:
                self._invalidate(r)
                affected.append(r)
        self._send_rerr(affected)

    def handle_rerr(self, msg: Rerr, sender: str) -> None:
        affected = []
        for dest, seq in msg.unreachable:
            r = self.routes.get(dest)
            if r is not None and r.valid and r.next_hop == sender:
                self._invalidate(r, seq)
                affected.append(r)
        self._send_rerr(affected)

    def _send_rerr(self, affected: list[AodvRoute]) -> None:
        if not affected:
            return
        precursors = set()
        for r in affected:
            precursors |= r.precursors
            r.precursors = set()
        msg = Rerr(tuple((r.destination, r.dest_seq_no) for r in affected))
        # one copy per subnet reaches every precursor on it
        by_subnet: dict[str, list[str]] = {}
        for p in sorted(precursors):
            s = self.link_to(p)
            if s is not None:
                by_subnet.setdefault(s, []).append(p)
        for s, members in sorted(by_subnet.items()):
            if len(members) == 1:
                self.send(s, msg, members[0])
            else:
                self.send(s, msg)

    def _flush_data(self, dest: str) -> None:
        n = self.buffered.pop(dest, 0)
        for _ in range(n):
            self._forward(Data(self.router, dest))

    def _forward(self, msg: Data) -> None:
        r = self.valid_route(msg.destination)
        if r is None or msg.ttl <= 0:
            self.count("data-dropped")
            return
        r.expires_at = self.now + self.params["active_route_timeout"]
        if not self.send_to(r.next_hop, Data(msg.source, msg.destination, msg.ttl - 1)):
            self.count("data-dropped")

    # -- handlers ----------------------------------------------------------

    def start(self) -> None:
        self.broadcast(Hello(self.seq))
        self.set_timer(self.params["hello_interval"], "hello")

    def on_timer(self, tag) -> None:
        if tag == "hello":
            self.broadcast(Hello(self.seq))
            self.set_timer(self.params["hello_interval"], "hello")
            limit = self.params["allowed_hello_loss"] * self.params["hello_interval"]
            for n in sorted(self.last_hello):
                if self.now - self.last_hello[n] > limit:
                    self.note(f"hello timeout {n}")
                    self.handle_link_break(n)
            for d in sorted(self.routes):
                r = self.routes[d]
                if r.valid and r.expires_at <= self.now:
                    self._invalidate(r)
            horizon = self.now - self.params["rreq_retention"]
            self.seen = {k: t for k, t in self.seen.items() if t > horizon}
        elif isinstance(tag, tuple) and tag[0] == "rreq":
            dest = tag[1]
            state = self.discovery.get(dest)
            if state is None or self.valid_route(dest) is not None:
                return
            if state[1] <= self.params["rreq_retries"]:
                self.originate_rreq(dest)
            else:
                self.discovery.pop(dest)
                dropped = self.buffered.pop(dest, 0)
                self.count("data-dropped", dropped)

    def on_message(self, msg, sender, subnet) -> None:
        if isinstance(msg, Hello):
            self.last_hello[sender] = self.now
        elif isinstance(msg, Rreq):
            self.handle_rreq(msg, sender)
        elif isinstance(msg, Rrep):
            self.handle_rrep(msg, sender)
        elif isinstance(msg, Rerr):
            self.handle_rerr(msg, sender)
        elif isinstance(msg, Data):
            if msg.destination == self.router:
                self.count("data-delivered")
            else:
                self._forward(msg)

    def on_data(self, destination: str) -> None:
        if destination == self.router:
            return
        if self.valid_route(destination) is not None:
            self._forward(Data(self.router, destination))
            return
        self.buffered[destination] = self.buffered.get(destination, 0) + 1
        if destination not in self.discovery:
            self.originate_rreq(destination)

    def table(self) -> dict[str, Row]:
        out = {}
        for d, r in self.routes.items():
            metric = r.hop_count if r.valid else INF
            out[d] = Row(metric, r.next_hop, (("seq", r.dest_seq_no), ("valid", int(r.valid))))
        return out

"""RIP-Tree: quiesce the affected subtree of a destination before re-converging.

The spanning tree for a destination is implicit: a router's parent is its
RIP next hop. When a router loses its route it floods INVALID_ROUTE; routers
whose next hop is the sender join the invalidation and relay it further.
Completions travel back to the root, which then releases the subtree with
START_ROUTING. Until released, a router ignores updates for the destination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rip import INFINITY, Rip, RipRequest

ROUTING = "routing"
INVALIDATING = "invalidating"
AWAITING_START = "awaiting-start"

INVALID_ROUTE = "INVALID_ROUTE"
INVALID_RELAY = "INVALID_RELAY"
NOT_CHILD = "NOT_CHILD"
INVALID_COMPLETE = "INVALID_COMPLETE"
START_ROUTING = "START_ROUTING"
CONTROL_KINDS = (INVALID_ROUTE, INVALID_RELAY, NOT_CHILD, INVALID_COMPLETE, START_ROUTING)


@dataclass(frozen=True)
class TreeControlMessage:
    kind: str
    destination: str
    invalidation_seq: tuple[str, int]  # (origin router, origin's counter)
    origin: str


@dataclass
class TreeState:
    phase: str = ROUTING
    invalidation_seq: tuple[str, int] | None = None
    parent: str | None = None  # neighbor, or our own name at the root
    awaiting: set[str] = field(default_factory=set)  # asked, no answer yet
    pending_children: set[str] = field(default_factory=set)  # relayed, not complete
    children: set[str] = field(default_factory=set)
    safety_timer_until: int | None = None


class RipTree(Rip):
    name = "rip-tree"
    defaults = {**Rip.defaults, "safety_timer": 60}

    def __init__(self, router, topology, params=None):
        super().__init__(router, topology, params)
        self.tree: dict[str, TreeState] = {}
        self.seen: set[tuple[str, tuple[str, int]]] = set()
        self.counter = 0
        self._deferred_links: set[str] = set()

    def state(self, dest: str) -> TreeState:
        s = self.tree.get(dest)
        if s is None:
            s = self.tree[dest] = TreeState()
        return s

    def phase(self, dest: str) -> str:
        s = self.tree.get(dest)
        return ROUTING if s is None else s.phase

    def _control(self, to: str, kind: str, dest: str, seq: tuple[str, int]) -> None:
        self.send_to(to, TreeControlMessage(kind, dest, seq, self.router))

    # -- RIP hooks ---------------------------------------------------------

    def updates_blocked(self, dest: str) -> bool:
        return self.phase(dest) != ROUTING

    def route_lost(self, dest: str, cause: str) -> None:
        if self.phase(dest) == ROUTING:
            self.begin_invalidation(dest, exclude=self.routes[dest].next_hop)
        else:
            self.count("reentrant-failure")
            self.note(f"failure of {dest} while {self.phase(dest)}")

    # -- invalidation ------------------------------------------------------

    def begin_invalidation(self, dest: str, exclude: str | None = None) -> None:
        self.counter += 1
        seq = (self.router, self.counter)
        self.tree[dest] = s = TreeState(INVALIDATING, seq, self.router)
        self.seen.add((dest, seq))
        self.note(f"invalidation {dest} {seq[0]}/{seq[1]} started")
        self._arm(dest, s)
        self._flood(dest, s, exclude)

    def _flood(self, dest: str, s: TreeState, exclude: str | None) -> None:
        s.awaiting = {n for n in self.live_neighbors() if n != exclude}
        for n in sorted(s.awaiting):
            self._control(n, INVALID_ROUTE, dest, s.invalidation_seq)
        self._check_done(dest, s)

    def _arm(self, dest: str, s: TreeState) -> None:
        s.safety_timer_until = self.now + self.params["safety_timer"]
        self.set_timer(self.params["safety_timer"], ("safety", dest))

    def _check_done(self, dest: str, s: TreeState) -> None:
        if s.phase != INVALIDATING or s.awaiting or s.pending_children:
            return
        if s.parent == self.router:
            self.note(f"invalidation {dest} {s.invalidation_seq[0]}/{s.invalidation_seq[1]} complete")
            self._start_routing(dest, s)
        else:
            s.phase = AWAITING_START
            self._control(s.parent, INVALID_COMPLETE, dest, s.invalidation_seq)

    def _start_routing(self, dest: str, s: TreeState) -> None:
        for c in sorted(s.children):
            self._control(c, START_ROUTING, dest, s.invalidation_seq)
        self._resume(dest)

    def _resume(self, dest: str) -> None:
        self.tree.pop(dest, None)
        self.cancel_timer(("safety", dest))
        if dest in self._deferred_links:
            self._deferred_links.discard(dest)
            if self.topo.is_up(dest):
                self._install(dest, 0, self.router, dest)
                return
        # fresh advertisements from everyone still routing
        for n in self.live_neighbors():
            self.send_to(n, RipRequest())

    def handle_invalid_route(self, msg: TreeControlMessage, sender: str) -> None:
        dest, seq = msg.destination, msg.invalidation_seq
        r = self.routes.get(dest)
        is_child = (
            (dest, seq) not in self.seen
            and self.phase(dest) == ROUTING
            and r is not None
            and r.reachable
            and r.next_hop == sender
        )
        if not is_child:
            self._control(sender, NOT_CHILD, dest, seq)
            return
        self.seen.add((dest, seq))
        s = self.tree[dest] = TreeState(INVALIDATING, seq, sender)
        self._control(sender, INVALID_RELAY, dest, seq)
        self._arm(dest, s)
        r.metric = INFINITY
        r.unreachable_since = self.now
        self._mark(dest)
        self._flood(dest, s, exclude=sender)

    def handle_response(self, msg: TreeControlMessage, sender: str) -> None:
        s = self.tree.get(msg.destination)
        if s is None or s.invalidation_seq != msg.invalidation_seq:
            self.count("stale-control")
            return
        if msg.kind == INVALID_RELAY:
            s.awaiting.discard(sender)
            s.pending_children.add(sender)
            s.children.add(sender)
        elif msg.kind == NOT_CHILD:
            s.awaiting.discard(sender)
        elif msg.kind == INVALID_COMPLETE:
            if sender not in s.pending_children:
                self.count("complete-unknown-child")
                return
            s.pending_children.discard(sender)
        self._check_done(msg.destination, s)

    def handle_start_routing(self, msg: TreeControlMessage, sender: str) -> None:
        s = self.tree.get(msg.destination)
        if s is None or s.invalidation_seq != msg.invalidation_seq or s.parent != sender:
            self.count("stale-control")
            return
        self._start_routing(msg.destination, s)

    # -- handlers ------------------------------------------------------------

    def other_message(self, msg, sender, subnet) -> None:
        if not isinstance(msg, TreeControlMessage):
            super().other_message(msg, sender, subnet)
        elif msg.kind == INVALID_ROUTE:
            self.handle_invalid_route(msg, sender)
        elif msg.kind == START_ROUTING:
            self.handle_start_routing(msg, sender)
        else:
            self.handle_response(msg, sender)

    def extra_timer(self, tag) -> None:
        if isinstance(tag, tuple) and tag[0] == "safety":
            dest = tag[1]
            if self.phase(dest) != ROUTING:
                self.note(f"safety timer {dest} expired")
                self.count("safety-expired")
                self._resume(dest)

    def on_link(self, subnet, up) -> None:
        if up and self.phase(subnet) != ROUTING:
            # finish the running invalidation before claiming the subnet again
            self._deferred_links.add(subnet)
            return
        if not up:
            self._deferred_links.discard(subnet)
        super().on_link(subnet, up)

    def on_neighbor(self, neighbor, subnet, up) -> None:
        if not up and self.link_to(neighbor) is None:
            for d in sorted(self.tree):
                s = self.tree[d]
                s.awaiting.discard(neighbor)
                s.pending_children.discard(neighbor)
                s.children.discard(neighbor)
                if s.parent == neighbor:
                    # lost the parent: act as our own root from here on
                    s.parent = self.router
                    if s.phase == AWAITING_START:
                        s.phase = INVALIDATING
                self._check_done(d, s)
        super().on_neighbor(neighbor, subnet, up)

    def row_extra(self, dest: str) -> tuple:
        p = self.phase(dest)
        return () if p == ROUTING else (("phase", p),)

"""RIP-MTI: RIP updates plus per-interface loop tables that veto source loops.

Metrics inside this module are hop counts in the interface model, where a
directly attached subnet is one hop away. That is the RIP metric plus one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .base import INF
from .rip import INFINITY, SPLIT_HORIZON, Rip

NORMAL = "normal"
STRICT = "strict"
CAREFUL = "careful"
MODES = (NORMAL, STRICT, CAREFUL)

SIMPLE_LOOP = "simple-loop"
POSSIBLE_SOURCE_LOOP = "possible-source-loop"

ACCEPT = "accept"
REJECT = "reject"
MARK_SUSPECT = "mark-suspect"


@dataclass
class LoopTables:
    """msilm[(A, B)] is the shortest simple loop seen between interfaces A and B."""

    msilm: dict[tuple[str, str], int] = field(default_factory=dict)
    mrpm: dict[str, int] = field(default_factory=dict)

    def recompute(self, iface: str) -> None:
        vals = [m for (a, _), m in self.msilm.items() if a == iface]
        if vals:
            self.mrpm[iface] = min(vals)
        else:
            self.mrpm.pop(iface, None)


@dataclass
class MtiRoute:
    destination: str
    metrics: dict[str, int] = field(default_factory=dict)  # interface -> hops
    interface: str | None = None
    next_hop: str | None = None
    mode: str = NORMAL
    suspect: bool = False
    replaced: tuple[str, int] | None = None  # invalid (interface, hops) a suspect displaced


def classify_update(tables: LoopTables, mA: float, mB: float, A: str, B: str, unknown: float | None = None) -> str:
    """Is the loop formed by the routes via A and via B a simple loop?

    Both the X and the Y inequality must hold. A missing mrpm entry makes
    the answer ``possible-source-loop`` unless ``unknown`` supplies a value.
    """
    ra = tables.mrpm.get(A, unknown)
    rb = tables.mrpm.get(B, unknown)
    if ra is None or rb is None:
        return POSSIBLE_SOURCE_LOOP
    m = mA + mB - 1
    no_x = m < ra + rb
    no_y = mA < ra + mB
    return SIMPLE_LOOP if no_x and no_y else POSSIBLE_SOURCE_LOOP


def learn_simple_loop(tables: LoopTables, A: str, B: str, m: int) -> bool:
    """Record a simple loop of metric ``m``; True if a table entry dropped."""
    if A == B:
        return False
    old = tables.msilm.get((A, B), INF)
    if m >= old:
        return False
    tables.msilm[(A, B)] = m
    tables.msilm[(B, A)] = m
    tables.recompute(A)
    tables.recompute(B)
    return True


def accept_alternative(tables: LoopTables, mA: float, mB: float, A: str, B: str, mode: str) -> tuple[str, str]:
    """Decide on an update via A after the chosen route via B went invalid.

    Returns the decision and the rule that produced it.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    loop = tables.msilm.get((A, B))
    if loop is None:
        return REJECT, "no simple path between interfaces"
    if mA + mB - 1 < loop:
        return REJECT, "combined metric below msilm"
    ra = tables.mrpm.get(A, INF)
    # the uncertain bound keeps its own off-by-one, unlike the Y inequality
    if mA >= ra + mB - 1:
        if mode == NORMAL:
            return ACCEPT, "uncertain"
        if mode == STRICT:
            return REJECT, "uncertain"
        return MARK_SUSPECT, "uncertain"
    return ACCEPT, "verified"


class RipMti(Rip):
    name = "rip-mti"
    defaults = {**Rip.defaults, "mode": NORMAL, "mitigation": (SPLIT_HORIZON,), "settle": 2}

    def __init__(self, router, topology, params=None):
        super().__init__(router, topology, params)
        self.mode = self.params["mode"]
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        self.tables = LoopTables()
        self.mti: dict[str, MtiRoute] = {}
        # last valid (interface, hops) per destination, kept after invalidation
        self.last_valid: dict[str, tuple[str, int]] = {}
        self._pending_suspect: tuple[str, str, int] | None = None

    def iface(self, subnet: str | None) -> str | None:
        return None if subnet is None else self.topo.interface_on(self.router, subnet)

    def _route(self, dest: str) -> MtiRoute:
        r = self.mti.get(dest)
        if r is None:
            r = self.mti[dest] = MtiRoute(dest, mode=self.mode)
        return r

    def _install(self, dest, metric, next_hop, subnet) -> None:
        super()._install(dest, metric, next_hop, subnet)
        if metric >= INFINITY:
            return
        m = self._route(dest)
        pending, self._pending_suspect = self._pending_suspect, None
        if pending is not None and pending[0] == dest:
            m.suspect, m.replaced = True, pending[1:]
        elif next_hop != m.next_hop:
            m.suspect, m.replaced = False, None
        m.interface, m.next_hop = self.iface(subnet), next_hop
        if m.interface is not None:
            m.metrics[m.interface] = metric + 1
            self.last_valid[dest] = (m.interface, metric + 1)

    # -- hooks ----------------------------------------------------------

    def observe(self, dest, sender, subnet, metric) -> None:
        A = self.iface(subnet)
        if A is None:
            return
        mA = min(metric + 2, INFINITY + 1)
        route = self._route(dest)
        route.metrics[A] = mA
        if route.suspect and route.next_hop == sender:
            self._review_suspect(dest, route, A, mA)
        r = self.routes.get(dest)
        if r is None or not r.reachable or metric >= INFINITY:
            return
        B = self.iface(r.subnet)
        if B is None or B == A:
            return
        mB = r.metric + 1
        if classify_update(self.tables, mA, mB, A, B, unknown=INF) == SIMPLE_LOOP:
            if learn_simple_loop(self.tables, A, B, mA + mB - 1):
                self.note(f"msilm {A}/{B} = {self.tables.msilm[(A, B)]} from {dest}")

    def accept_alternative(self, dest, sender, subnet, candidate) -> bool:
        lost = self.last_valid.get(dest)
        A = self.iface(subnet)
        if lost is None or A is None or A == lost[0] or dest not in self.routes:
            # not learned yet, garbage-collected, or the same interface: plain RIP
            return True
        B, mB = lost
        r = self.routes[dest]
        settle = self.params["settle"]
        if self.mode == STRICT and r.unreachable_since is not None and self.now < r.unreachable_since + settle:
            # news of the failure may still be in flight; look again once it has landed
            self.count("mti-deferred")
            self.set_timer(r.unreachable_since + settle - self.now, ("settle", dest))
            return False
        mA = candidate + 1
        decision, rule = accept_alternative(self.tables, mA, mB, A, B, self.mode)
        self.note(f"mti {dest} via {A} ({mA}) after {B} ({mB}): {decision}, {rule}")
        self.count(f"mti-{decision}")
        if decision == MARK_SUSPECT:
            self._pending_suspect = (dest, B, mB)
        return decision != REJECT

    def extra_timer(self, tag) -> None:
        if not (isinstance(tag, tuple) and tag[0] == "settle"):
            return
        dest = tag[1]
        r = self.routes.get(dest)
        if r is None or r.reachable or self.updates_blocked(dest):
            return
        live = set(self.live_neighbors())
        offers = sorted(
            (m + 1, n) for n, heard in self.heard.items() if n in live and (m := heard.get(dest)) is not None and m + 1 < INFINITY
        )
        for cand, n in offers:
            subnet = self.link_to(n)
            if self.accept_alternative(dest, n, subnet, cand):
                self._install(dest, cand, n, subnet)
                return

    def _review_suspect(self, dest: str, route: MtiRoute, A: str, mA: int) -> None:
        """Suspect routes are evicted on a rising metric or a failed reject rule."""
        r = self.routes.get(dest)
        if r is None or not r.reachable or route.replaced is None:
            route.suspect = False
            return
        B, mB = route.replaced
        decision, _ = accept_alternative(self.tables, mA, mB, A, B, NORMAL)
        if mA > r.metric + 1 or decision == REJECT:
            self.note(f"mti {dest} suspect via {A} evicted")
            self.count("mti-evicted")
            route.suspect, route.replaced = False, None
            self._set_unreachable(dest, "update")

    def row_extra(self, dest: str) -> tuple:
        m = self.mti.get(dest)
        if m is not None and m.suspect:
            return (("suspect", 1),)
        return ()

"""RIP with optional split horizon, poisoned reverse and hold-down."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .base import Protocol, Row

INFINITY = 16

NONE = "none"
SPLIT_HORIZON = "split-horizon"
POISONED_REVERSE = "poisoned-reverse"
HOLD_DOWN = "hold-down"
MITIGATIONS = (NONE, SPLIT_HORIZON, POISONED_REVERSE, HOLD_DOWN)


class MalformedUpdate(ValueError):
    pass


@dataclass(frozen=True)
class RipUpdate:
    entries: tuple[tuple[str, int], ...]
    kind: str = "RIP_UPDATE"


@dataclass(frozen=True)
class RipRequest:
    kind: str = "RIP_REQUEST"


@dataclass
class RipRoute:
    destination: str
    metric: int
    next_hop: str
    subnet: str | None = None  # subnet the route was learned over
    hold_down_until: int | None = None
    refreshed: int = 0
    unreachable_since: int | None = None

    @property
    def reachable(self) -> bool:
        return self.metric < INFINITY


def parse_mitigation(value: str | Iterable[str] | None) -> frozenset[str]:
    if value is None:
        return frozenset()
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    out = set()
    for v in value:
        if v not in MITIGATIONS:
            raise ValueError(f"unknown mitigation {v!r}; choose from {MITIGATIONS}")
        if v != NONE:
            out.add(v)
    if {SPLIT_HORIZON, POISONED_REVERSE} <= out:
        raise ValueError("split-horizon and poisoned-reverse are alternatives")
    return frozenset(out)


class Rip(Protocol):
    name = "rip"
    defaults = {
        "mitigation": (),
        "hold_down": 60,
        # where hold-down starts: "update", "local" or "both"
        "hold_down_trigger": "both",
        "interval": 30,
        "timeout": 180,
        "garbage": 120,
        "triggered": True,
    }

    def __init__(self, router, topology, params=None):
        super().__init__(router, topology, params)
        self.mitigation = parse_mitigation(self.params["mitigation"])
        self.routes: dict[str, RipRoute] = {}
        self.heard: dict[str, dict[str, int]] = {}
        self._changed: set[str] = set()

    # -- helpers ---------------------------------------------------------

    @property
    def hold_down_enabled(self) -> bool:
        return HOLD_DOWN in self.mitigation

    def held(self, dest: str) -> bool:
        r = self.routes.get(dest)
        return bool(self.hold_down_enabled and r and r.hold_down_until is not None and self.now < r.hold_down_until)

    def _mark(self, dest: str) -> None:
        self._changed.add(dest)

    def _set_unreachable(self, dest: str, cause: str) -> None:
        r = self.routes[dest]
        was = r.reachable
        r.metric = INFINITY
        if was:
            r.unreachable_since = self.now
            self._mark(dest)
            trigger = self.params["hold_down_trigger"]
            if trigger == "both" or trigger == cause:
                self.start_hold_down(dest, self.now, self.params["hold_down"])
            self.route_lost(dest, cause)

    def start_hold_down(self, dest: str, now: int, duration: int) -> None:
        if not self.hold_down_enabled:
            return
        r = self.routes[dest]
        r.metric = INFINITY
        r.hold_down_until = now + duration
        self.set_timer(duration, ("hold-down", dest))
        self.note(f"hold-down {dest} until {r.hold_down_until}")

    def _install(self, dest: str, metric: int, next_hop: str, subnet: str | None) -> None:
        r = self.routes.get(dest)
        changed = r is None or r.metric != metric or r.next_hop != next_hop
        if r is None:
            r = self.routes[dest] = RipRoute(dest, metric, next_hop, subnet)
        r.metric, r.next_hop, r.subnet = metric, next_hop, subnet
        r.refreshed = self.now
        if metric < INFINITY:
            r.unreachable_since = None
            r.hold_down_until = None
        if changed:
            self._mark(dest)

    # -- hooks for derived protocols --------------------------------------

    def updates_blocked(self, dest: str) -> bool:
        return False

    def accept_alternative(self, dest: str, sender: str, subnet: str, candidate: int) -> bool:
        return True

    def observe(self, dest: str, sender: str, subnet: str, metric: int) -> None:
        """Called for every entry of every accepted update."""

    def route_lost(self, dest: str, cause: str) -> None:
        """The route to ``dest`` just became unreachable."""

    # -- advertisements --------------------------------------------------

    def build_advertisement(self, to: str, mitigation: str | None = None, only: Iterable[str] | None = None) -> list[tuple[str, int]]:
        if mitigation is None:
            if POISONED_REVERSE in self.mitigation:
                mitigation = POISONED_REVERSE
            elif SPLIT_HORIZON in self.mitigation:
                mitigation = SPLIT_HORIZON
            else:
                mitigation = NONE
        dests = sorted(self.routes) if only is None else sorted(d for d in only if d in self.routes)
        out = []
        for d in dests:
            r = self.routes[d]
            if r.next_hop == to and r.next_hop != self.router:
                if mitigation == SPLIT_HORIZON:
                    continue
                if mitigation == POISONED_REVERSE:
                    out.append((d, INFINITY))
                    continue
            out.append((d, r.metric))
        return out

    def advertise(self, only: Iterable[str] | None = None, neighbors: Iterable[str] | None = None) -> None:
        only = None if only is None else set(only)
        for n in neighbors if neighbors is not None else self.live_neighbors():
            entries = self.build_advertisement(n, only=only)
            if entries or only is None:
                self.send_to(n, RipUpdate(tuple(entries)))

    def _flush(self) -> None:
        if self._changed and self.params["triggered"] and not self.synchronous:
            self.advertise(only=self._changed)
        self._changed = set()

    # -- handlers ----------------------------------------------------------

    def start(self) -> None:
        for s in self.topo.attached(self.router):
            if self.topo.is_up(s):
                self._install(s, 0, self.router, s)
        if not self.synchronous:
            self.advertise()
            self.set_timer(self.params["interval"], "periodic")
        self._changed = set()

    def on_round(self) -> None:
        self.advertise()
        self._changed = set()

    def on_timer(self, tag) -> None:
        if tag == "periodic":
            self._expire()
            self.advertise()
            self.set_timer(self.params["interval"], "periodic")
            self._changed = set()
            return
        if isinstance(tag, tuple) and tag[0] == "hold-down":
            self._hold_down_expired(tag[1])
        self.extra_timer(tag)
        self._flush()

    def extra_timer(self, tag) -> None:
        pass

    def _expire(self) -> None:
        for d in sorted(self.routes):
            r = self.routes[d]
            if r.next_hop == self.router:
                continue
            if r.reachable and self.now - r.refreshed >= self.params["timeout"]:
                self._set_unreachable(d, "local")
            elif not r.reachable and r.unreachable_since is not None:
                if self.now - r.unreachable_since >= self.params["garbage"] and not self.held(d):
                    del self.routes[d]
                    self._mark(d)

    def _hold_down_expired(self, dest: str) -> None:
        r = self.routes.get(dest)
        if r is None or r.hold_down_until is None or self.now < r.hold_down_until:
            return
        r.hold_down_until = None
        self.note(f"hold-down {dest} expired")
        if r.reachable or self.updates_blocked(dest):
            return
        best = None
        live = set(self.live_neighbors())
        for n in sorted(self.heard):
            m = self.heard[n].get(dest)
            if n in live and m is not None and m + 1 < INFINITY:
                if best is None or m + 1 < best[0]:
                    best = (m + 1, n)
        if best is not None:
            self._install(dest, best[0], best[1], self.link_to(best[1]))

    def on_message(self, msg, sender, subnet) -> None:
        if isinstance(msg, RipUpdate):
            try:
                self.process_update(sender, msg.entries, subnet)
            except MalformedUpdate:
                self.count("malformed")
        elif isinstance(msg, RipRequest):
            self.advertise(neighbors=[sender])
        else:
            self.other_message(msg, sender, subnet)
        self._flush()

    def other_message(self, msg, sender, subnet) -> None:
        self.count("unexpected-message")

    def process_update(self, sender: str, entries, subnet: str | None = None) -> None:
        for dest, metric in entries:
            if not 0 <= metric <= INFINITY:
                raise MalformedUpdate(f"metric {metric} for {dest}")
        if subnet is None:
            subnet = self.link_to(sender)
        heard = self.heard.setdefault(sender, {})
        for dest, metric in entries:
            heard[dest] = metric
            self.observe(dest, sender, subnet, metric)
            cand = min(metric + 1, INFINITY)
            r = self.routes.get(dest)
            if r is not None and r.next_hop == self.router:
                continue
            if self.updates_blocked(dest):
                self.count("blocked")
                continue
            if self.held(dest):
                if cand < INFINITY:
                    self.count("hold-down-discard")
                continue
            if r is None:
                if cand < INFINITY and self.accept_alternative(dest, sender, subnet, cand):
                    self._install(dest, cand, sender, subnet)
            elif r.next_hop == sender:
                if cand >= INFINITY:
                    r.refreshed = self.now
                    self._set_unreachable(dest, "update")
                else:
                    self._install(dest, cand, sender, subnet)
            elif cand < r.metric:
                if r.reachable or self.accept_alternative(dest, sender, subnet, cand):
                    self._install(dest, cand, sender, subnet)

    def on_link(self, subnet, up) -> None:
        if up:
            self._install(subnet, 0, self.router, subnet)
            r = self.routes[subnet]
            r.hold_down_until = None
        elif subnet in self.routes and self.routes[subnet].next_hop == self.router:
            self._set_unreachable(subnet, "local")
        self._flush()

    def on_neighbor(self, neighbor, subnet, up) -> None:
        if up:
            self.advertise(neighbors=[neighbor])
            self.neighbor_up(neighbor)
        elif self.link_to(neighbor) is None:
            self.heard.pop(neighbor, None)
            for d in sorted(self.routes):
                r = self.routes[d]
                if r.next_hop == neighbor and r.reachable:
                    self._set_unreachable(d, "local")
        self._flush()

    def neighbor_up(self, neighbor: str) -> None:
        pass

    def table(self) -> dict[str, Row]:
        out = {}
        for d, r in self.routes.items():
            extra = ()
            if self.held(d):
                extra = (("hold", r.hold_down_until),)
            out[d] = Row(r.metric, r.next_hop, extra + self.row_extra(d))
        return out

    def row_extra(self, dest: str) -> tuple:
        return ()

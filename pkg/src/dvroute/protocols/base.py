"""Behavior contract every routing protocol implements for the engine."""

from __future__ import annotations

import math
from typing import Any, NamedTuple

from ..topology import Topology

INF = math.inf


class Row(NamedTuple):
    """One routing-table row as seen by traces and checkers."""

    metric: float
    next_hop: str | None
    extra: tuple = ()

    def get(self, key, default=None):
        for k, v in self.extra:
            if k == key:
                return v
        return default


class Send(NamedTuple):
    subnet: str
    message: Any
    to: str | None  # None broadcasts to every other router on the subnet


class Timer(NamedTuple):
    delay: int
    tag: Any


class CancelTimer(NamedTuple):
    tag: Any


class Note(NamedTuple):
    text: str


class Protocol:
    """Per-router state machine driven by the engine.

    Handlers mutate only this router's state and queue effects with
    :meth:`send`, :meth:`set_timer` and :meth:`note`; the engine drains them
    after every call. ``now`` is set by the engine before each handler runs.
    """

    name = "base"
    defaults: dict[str, Any] = {}

    def __init__(self, router: str, topology: Topology, params: dict | None = None):
        self.router = router
        self.topo = topology
        self.params = {**self.defaults, **(params or {})}
        self.synchronous = bool(self.params.get("synchronous", False))
        self.now = 0
        self._effects: list = []
        self.counters: dict[str, int] = {}

    # -- effect helpers ----------------------------------------------------

    def send(self, subnet: str, message: Any, to: str | None = None) -> None:
        self._effects.append(Send(subnet, message, to))

    def send_to(self, neighbor: str, message: Any) -> bool:
        """Unicast over the first up subnet shared with ``neighbor``."""
        s = self.link_to(neighbor)
        if s is None:
            return False
        self.send(s, message, neighbor)
        return True

    def broadcast(self, message: Any, exclude: str | None = None) -> None:
        for s in self.topo.attached(self.router):
            if s != exclude and len(self.topo.interfaces_on(s)) > 1:
                self.send(s, message)

    def set_timer(self, delay: int, tag: Any) -> None:
        self._effects.append(Timer(delay, tag))

    def cancel_timer(self, tag: Any) -> None:
        self._effects.append(CancelTimer(tag))

    def note(self, text: str) -> None:
        self._effects.append(Note(text))

    def count(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n

    def drain(self) -> list:
        out, self._effects = self._effects, []
        return out

    # -- topology helpers ----------------------------------------------------

    def link_to(self, neighbor: str) -> str | None:
        return self.topo.link_between(self.router, neighbor)

    def live_neighbors(self) -> list[str]:
        return list(self.topo.neighbor_routers(self.router))

    def iface(self, subnet: str) -> str:
        return self.topo.interface_on(self.router, subnet)

    # -- handlers ----------------------------------------------------------

    def start(self) -> None:
        pass

    def on_message(self, msg: Any, sender: str, subnet: str) -> None:
        pass

    def on_timer(self, tag: Any) -> None:
        pass

    def on_link(self, subnet: str, up: bool) -> None:
        """An attached subnet changed state."""

    def on_neighbor(self, neighbor: str, subnet: str, up: bool) -> None:
        pass

    def on_round(self) -> None:
        """Synchronous mode: emit this round's output."""

    def on_data(self, destination: str) -> None:
        pass

    def table(self) -> dict[str, Row]:
        return {}

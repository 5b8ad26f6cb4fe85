"""Protocol registry: selector name -> class plus how the oracle should judge it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import oracle
from .topology import Topology
from .protocols.aodv import Aodv
from .protocols.babel import Babel
from .protocols.base import INF, Protocol, Row
from .protocols.eigrp import Eigrp
from .protocols.rip import INFINITY, Rip
from .protocols.ripmti import RipMti
from .protocols.riptree import RipTree


@dataclass(frozen=True)
class ProtocolInfo:
    cls: type[Protocol]
    algebra: str
    infinity: float = INF
    reactive: bool = False
    invariant: Callable[[dict], list] | None = None

    def oracle(self, topology: Topology, params: dict | None = None) -> oracle.OracleResult:
        params = params or {}
        if self.algebra == oracle.COMPOSITE:
            return oracle.shortest_paths(topology, self.algebra, k=tuple(params.get("k", Eigrp.defaults["k"])))
        cap = self.infinity if self.algebra == oracle.SUBNET_HOPS else INF
        return oracle.shortest_paths(topology, self.algebra, cap=cap)


PROTOCOLS: dict[str, ProtocolInfo] = {
    "rip": ProtocolInfo(Rip, oracle.SUBNET_HOPS, INFINITY),
    "rip-mti": ProtocolInfo(RipMti, oracle.SUBNET_HOPS, INFINITY),
    "rip-tree": ProtocolInfo(RipTree, oracle.SUBNET_HOPS, INFINITY),
    "aodv": ProtocolInfo(Aodv, oracle.ROUTER_HOPS, reactive=True, invariant=oracle.aodv_violations),
    "eigrp": ProtocolInfo(Eigrp, oracle.COMPOSITE, invariant=oracle.eigrp_violations),
    "babel": ProtocolInfo(Babel, oracle.ROUTER_COST, invariant=oracle.babel_violations),
}


def get(name: str) -> ProtocolInfo:
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; choose from {sorted(PROTOCOLS)}") from None


def factory(name: str, params: dict | None = None) -> Callable[[str, Topology], Protocol]:
    """Engine factory building one ``name`` instance per router."""
    cls = get(name).cls
    params = dict(params or {})

    def make(router: str, topology: Topology) -> Protocol:
        return cls(router, topology, params)

    return make


__all__ = ["PROTOCOLS", "ProtocolInfo", "Protocol", "Row", "factory", "get"]

"""Network model shared by every protocol and by the oracle.

A network is a set of subnets and a set of interfaces; routers partition
the interfaces and the ``con`` relation attaches interfaces to subnets.
Point-to-point links are two-interface subnets, stub networks are
one-interface subnets.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

WILDCARD = "*"


class TopologyError(ValueError):
    pass


class LoopKind(str, Enum):
    NOT_A_LOOP = "not-a-loop"
    SIMPLE = "simple-loop"
    X_COMBINATION = "x-combination"
    Y_COMBINATION = "y-combination"


@dataclass(frozen=True)
class Hop:
    out_interface: str
    subnet: str
    in_interface: str = WILDCARD


@dataclass(frozen=True)
class Path:
    hops: tuple[Hop, ...]

    @property
    def metric(self) -> int:
        return len(self.hops)

    def subnets(self) -> list[str]:
        return [h.subnet for h in self.hops]


class Topology:
    """Routers, interfaces and subnets plus the mutable per-subnet link state.

    ``routers`` maps a router id to its interface ids and ``con`` maps every
    interface to the subnet it is attached to.
    """

    def __init__(
        self,
        routers: Mapping[str, Iterable[str]],
        con: Mapping[str, str],
        subnets: Iterable[str] | None = None,
        attrs: Mapping[str, Mapping[str, float]] | None = None,
    ):
        self.routers: dict[str, tuple[str, ...]] = {
            r: tuple(ifaces) for r, ifaces in routers.items()
        }
        self.con: dict[str, str] = dict(con)
        names = set(self.con.values())
        if subnets is not None:
            names |= set(subnets)
        self.subnets: tuple[str, ...] = tuple(sorted(names))
        self.attrs: dict[str, dict[str, float]] = {
            s: dict(v) for s, v in (attrs or {}).items()
        }
        self.link_state: dict[str, bool] = {s: True for s in self.subnets}
        self._cache: dict = {}
        self._owner: dict[str, str] = {}
        self._validate()
        self._on_subnet: dict[str, tuple[str, ...]] = {s: () for s in self.subnets}
        for iface in sorted(self.con):
            s = self.con[iface]
            self._on_subnet[s] = self._on_subnet[s] + (iface,)
        self._routers_on = {
            s: tuple(sorted({self._owner[i] for i in ifs})) for s, ifs in self._on_subnet.items()
        }
        self._attached = {
            r: tuple(sorted({self.con[i] for i in ifs if i in self.con}))
            for r, ifs in self.routers.items()
        }

    def _validate(self) -> None:
        for r, ifaces in self.routers.items():
            if not ifaces:
                raise TopologyError(f"router {r!r} has no interfaces")
            for iface in ifaces:
                if iface in self._owner:
                    raise TopologyError(
                        f"interface {iface!r} belongs to both {self._owner[iface]!r} and {r!r}"
                    )
                self._owner[iface] = r
        for iface in self.con:
            if iface not in self._owner:
                raise TopologyError(f"connection references unknown interface {iface!r}")
        for s in self.attrs:
            if s not in self.link_state:
                raise TopologyError(f"attributes given for unknown subnet {s!r}")

    # -- lookups -------------------------------------------------------------

    def owner(self, iface: str) -> str:
        try:
            return self._owner[iface]
        except KeyError:
            raise TopologyError(f"unknown interface {iface!r}") from None

    def subnet_of(self, iface: str) -> str | None:
        return self.con.get(iface)

    def interfaces_on(self, subnet: str) -> tuple[str, ...]:
        return self._on_subnet[subnet]

    def routers_on(self, subnet: str) -> tuple[str, ...]:
        return self._routers_on[subnet]

    def interface_on(self, router: str, subnet: str) -> str | None:
        for iface in self.routers[router]:
            if self.con.get(iface) == subnet:
                return iface
        return None

    def attached(self, router: str) -> tuple[str, ...]:
        try:
            return self._attached[router]
        except KeyError:
            raise TopologyError(f"unknown router {router!r}") from None

    def is_up(self, subnet: str) -> bool:
        return self.link_state[subnet]

    def _check_router(self, router: str) -> None:
        if router not in self.routers:
            raise TopologyError(f"unknown router {router!r}")

    def check_subnet(self, subnet: str) -> None:
        if subnet not in self.link_state:
            raise TopologyError(f"unknown subnet {subnet!r}")

    def neighbors(self, router: str) -> set[tuple[str, str]]:
        """Every (router, subnet) pair sharing an up subnet with ``router``."""
        self._check_router(router)
        out = set()
        for s in self.attached(router):
            if not self.link_state[s]:
                continue
            for other in self.routers_on(s):
                if other != router:
                    out.add((other, s))
        return out

    def neighbor_routers(self, router: str) -> list[str]:
        key = ("nbrs", router)
        if key not in self._cache:
            self._cache[key] = sorted({n for n, _ in self.neighbors(router)})
        return self._cache[key]

    def link_between(self, router: str, neighbor: str) -> str | None:
        """First up subnet (in attachment order) shared by the two routers."""
        key = ("link", router, neighbor)
        if key not in self._cache:
            found = None
            for s in self.attached(router):
                if self.link_state[s] and neighbor in self._routers_on[s]:
                    found = s
                    break
            self._cache[key] = found
        return self._cache[key]

    def adjacency(self) -> dict[str, list[str]]:
        return {r: self.neighbor_routers(r) for r in sorted(self.routers)}

    def diameter(self) -> int:
        """Largest finite router-to-router hop distance over up links."""
        adj = self.adjacency()
        best = 0
        for src in adj:
            dist = {src: 0}
            frontier = [src]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in adj[u]:
                        if v not in dist:
                            dist[v] = dist[u] + 1
                            nxt.append(v)
                frontier = nxt
            best = max(best, max(dist.values()))
        return best

    def set_link(self, subnet: str, up: bool) -> None:
        self.check_subnet(subnet)
        if self.link_state[subnet] != up:
            self.link_state[subnet] = up
            self._cache = {}

    def copy(self) -> "Topology":
        t = Topology(self.routers, self.con, self.subnets, self.attrs)
        t.link_state = dict(self.link_state)
        t._cache = {}
        return t

    # -- paths ---------------------------------------------------------------

    def validate_path(self, path: Path) -> None:
        if not path.hops:
            raise TopologyError("empty path")
        for k, hop in enumerate(path.hops):
            if self.con.get(hop.out_interface) != hop.subnet:
                raise TopologyError(f"hop {k}: {hop.out_interface!r} not on {hop.subnet!r}")
            if hop.in_interface != WILDCARD:
                if self.con.get(hop.in_interface) != hop.subnet:
                    raise TopologyError(f"hop {k}: {hop.in_interface!r} not on {hop.subnet!r}")
            if k + 1 < len(path.hops):
                if hop.in_interface == WILDCARD:
                    raise TopologyError(f"hop {k}: wildcard hop must be last")
                nxt = path.hops[k + 1].out_interface
                if self.owner(hop.in_interface) != self.owner(nxt):
                    raise TopologyError(f"hops {k} and {k + 1} do not chain")

    def __repr__(self) -> str:
        return f"Topology(routers={len(self.routers)}, subnets={len(self.subnets)})"


def classify_loop(topology: Topology, path: Path, origin_router: str, destination: str) -> LoopKind:
    """Classify a path leaving ``origin_router`` as a simple loop or a source loop."""
    topology.validate_path(path)
    if destination not in path.subnets():
        raise TopologyError(f"destination {destination!r} not on the path")
    mine = set(topology.routers[origin_router])
    first, last = path.hops[0], path.hops[-1]
    if first.out_interface not in mine:
        raise TopologyError("path does not start at the origin router")
    if last.in_interface == WILDCARD or last.in_interface not in mine:
        return LoopKind.NOT_A_LOOP
    # last intermediate visit to the origin router decides X vs Y
    reentry = None
    for j in range(len(path.hops) - 1):
        if path.hops[j].in_interface in mine:
            reentry = j
    if reentry is None:
        return LoopKind.SIMPLE
    leave_again = path.hops[reentry + 1].out_interface
    if leave_again == last.in_interface:
        return LoopKind.Y_COMBINATION
    return LoopKind.X_COMBINATION


def neighbors(topology: Topology, router: str) -> set[tuple[str, str]]:
    return topology.neighbors(router)


# -- builders ----------------------------------------------------------------


def build(links: Iterable[tuple[str, Iterable[str]]], attrs=None) -> Topology:
    """Build a topology from ``(subnet, routers)`` pairs.

    Interface ids are derived as ``<router>.<subnet>``.
    """
    routers: dict[str, list[str]] = {}
    con: dict[str, str] = {}
    for subnet, members in links:
        for r in members:
            iface = f"{r}.{subnet}"
            routers.setdefault(r, []).append(iface)
            con[iface] = subnet
    return Topology(routers, con, attrs=attrs)


def fig1_chain() -> Topology:
    """A - B - C with a stub network ``nC`` hanging off C."""
    return build([("ab", "AB"), ("bc", "BC"), ("nC", "C")])


def fig2_triangle() -> Topology:
    """A, B, C pairwise linked; C owns the stub subnet ``n``."""
    return build([("ab", "AB"), ("bc", "BC"), ("ac", "AC"), ("n", "C")])


def babel_diagram() -> Topology:
    """Source S linked to A and B, with A and B also linked to each other.

    The B-S link costs 2 so that both A and B prefer their direct link and
    B's distance (2) is not below A's (1). S also owns stub ``nS``.
    """
    attrs = {
        "as": {"cost": 1, "delay": 1, "bandwidth": 100},
        "bs": {"cost": 2, "delay": 2, "bandwidth": 100},
        "ab": {"cost": 1, "delay": 1, "bandwidth": 100},
        "nS": {"cost": 1, "delay": 1, "bandwidth": 100},
    }
    return build([("as", ["A", "S"]), ("bs", ["B", "S"]), ("ab", ["A", "B"]), ("nS", ["S"])], attrs)


def two_subtrees() -> Topology:
    """A owns ``n``; subtree B-C and subtree D-E hang off A, joined by C-E.

    C reaches ``n`` through B in two hops and E through D in two hops, so
    the C-E link is a direct link between routers far apart in the tree.
    """
    return build([("n", "A"), ("ab", "AB"), ("bc", "BC"), ("ad", "AD"), ("de", "DE"), ("ce", "CE")])


def balanced_tree(depth: int, fanout: int = 2) -> Topology:
    """Complete tree of routers rooted at ``R`` whose root owns stub ``n``."""
    links = [("n", ["R"])]
    level = ["R"]
    for _ in range(depth):
        nxt = []
        for parent in level:
            for k in range(fanout):
                child = f"{parent}{k}" if parent != "R" else f"T{k}"
                links.append((f"{parent}-{child}", [parent, child]))
                nxt.append(child)
        level = nxt
    return build(links)


def random_connected(
    seed: int,
    n_min: int = 4,
    n_max: int = 20,
    p: float = 0.25,
    stubs: bool = True,
    vector: bool = False,
) -> Topology:
    """Connected Erdos-Renyi style topology with point-to-point links.

    A random spanning tree guarantees connectivity; extra edges are added
    with probability ``p``. With ``stubs`` every router also owns a stub
    subnet. With ``vector`` each subnet gets EIGRP link attributes.
    """
    rng = random.Random(seed)
    n = rng.randint(n_min, n_max)
    names = [f"R{i:02d}" for i in range(n)]
    edges = set()
    for i in range(1, n):
        j = rng.randrange(i)
        edges.add((names[j], names[i]))
    for i in range(n):
        for j in range(i + 1, n):
            if (names[i], names[j]) not in edges and rng.random() < p:
                edges.add((names[i], names[j]))
    links = [(f"{a}-{b}", [a, b]) for a, b in sorted(edges)]
    if stubs:
        links += [(f"s{r}", [r]) for r in names]
    attrs = None
    if vector:
        attrs = {s: {"bandwidth": 100, "delay": rng.randint(1, 10)} for s, _ in links}
    return build(links, attrs)


@dataclass
class LinkFlap:
    subnet: str
    down_at: int
    up_at: int


def random_flaps(topology: Topology, seed: int, start: int, end: int, count: tuple[int, int] = (1, 5)) -> list[LinkFlap]:
    """Scripted link flaps on non-stub subnets, each lasting 5..40 ticks."""
    rng = random.Random(seed * 7919 + 17)
    links = [s for s in topology.subnets if len(topology.interfaces_on(s)) > 1]
    flaps = []
    for _ in range(rng.randint(*count)):
        s = rng.choice(links)
        t = rng.randint(start, end)
        flaps.append(LinkFlap(s, t, t + rng.randint(5, 40)))
    return flaps

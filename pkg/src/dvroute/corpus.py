"""Seeded random scenarios shared by the property tests and the acceptance suite."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .engine import ScriptEvent, link_change, send_data
from .topology import Topology, random_connected, random_flaps

FLAP_START = 20
FLAP_END = 150
HORIZON = 300


@dataclass
class Scenario:
    seed: int
    topology: Topology
    script: list[ScriptEvent]
    horizon: int = HORIZON


def scenario(seed: int, vector: bool = False, data: bool = False, flaps: bool = True) -> Scenario:
    """Connected topology of 4..20 routers with 1..5 link flaps.

    ``data`` adds on-demand traffic between random router pairs so reactive
    protocols have something to discover.
    """
    topo = random_connected(seed, vector=vector)
    script: list[ScriptEvent] = []
    if flaps:
        for f in random_flaps(topo, seed, FLAP_START, FLAP_END):
            script.append(link_change(f.down_at, f.subnet, False))
            script.append(link_change(f.up_at, f.subnet, True))
    if data:
        rng = random.Random(seed * 31 + 7)
        routers = sorted(topo.routers)
        for _ in range(rng.randint(5, 12)):
            a, b = rng.sample(routers, 2)
            script.append(send_data(rng.randint(2, 220), a, b))
    return Scenario(seed, topo, script)

"""INI-style scenario files: topology, scripted events, run settings and protocol params.

Example::

    [routers]
    A = A.ab, A.ac
    B = B.ab, B.bc
    C = C.bc, C.ac, C.n

    [subnets]
    ab = A.ab, B.ab
    bc = B.bc, C.bc | delay=2 bandwidth=10
    ac = A.ac, C.ac
    n = C.n

    [events]
    30 = down n
    35 = up n; send A C

    [latency]
    bc = 3

    [run]
    horizon = 120
    seed = 0

    [params]
    mitigation = split-horizon
"""

from __future__ import annotations

import ast
import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ASYNCHRONOUS, LATENCY, LINK, ROUTER, ScriptEvent, latency_change, link_change, router_change, send_data
from .topology import Topology, TopologyError

SECTIONS = ("routers", "subnets", "events", "latency", "run", "params")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    topology: Topology
    events: list[ScriptEvent] = field(default_factory=list)
    latency: dict[str, int] = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    horizon: int = 100
    seed: int = 0
    engine: str = ASYNCHRONOUS


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def _number(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ScenarioError(f"not a number: {text!r}") from None
    return int(v) if v.is_integer() else v


def parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def _event(tick: int, command: str) -> ScriptEvent:
    words = command.split()
    if not words:
        raise ScenarioError(f"empty event at tick {tick}")
    verb, args = words[0].lower(), words[1:]
    arity = {"down": 1, "up": 1, "router-down": 1, "router-up": 1, "latency": 2, "send": 2}
    if verb not in arity:
        raise ScenarioError(f"unknown event {verb!r} at tick {tick}; choose from {sorted(arity)}")
    if len(args) != arity[verb]:
        raise ScenarioError(f"event {verb!r} takes {arity[verb]} argument(s), got {args}")
    if verb in ("down", "up"):
        return link_change(tick, args[0], verb == "up")
    if verb in ("router-down", "router-up"):
        return router_change(tick, args[0], verb == "router-up")
    if verb == "latency":
        return latency_change(tick, args[0], int(args[1]))
    return send_data(tick, args[0], args[1])


def parse(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str  # keep router and subnet names case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ScenarioError(str(e)) from e
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ScenarioError(f"unknown section(s) {sorted(unknown)}")
    if not cp.has_section("routers") or not cp.has_section("subnets"):
        raise ScenarioError("a scenario needs [routers] and [subnets]")

    routers = {r: _split(v) for r, v in cp.items("routers")}
    con: dict[str, str] = {}
    attrs: dict[str, dict[str, float]] = {}
    for subnet, value in cp.items("subnets"):
        members, _, extra = value.partition("|")
        for iface in _split(members):
            if iface in con:
                raise ScenarioError(f"interface {iface!r} attached to both {con[iface]!r} and {subnet!r}")
            con[iface] = subnet
        if extra.strip():
            a = {}
            for item in extra.split():
                key, eq, val = item.partition("=")
                if not eq:
                    raise ScenarioError(f"subnet attribute {item!r} is not key=value")
                a[key] = _number(val)
            attrs[subnet] = a
    try:
        topo = Topology(routers, con, subnets=[s for s, _ in cp.items("subnets")], attrs=attrs)
    except TopologyError as e:
        raise ScenarioError(str(e)) from e

    sc = Scenario(topo)
    if cp.has_section("events"):
        for tick, value in cp.items("events"):
            t = int(_number(tick))
            for command in value.replace("\n", ";").split(";"):
                if command.strip():
                    sc.events.append(_event(t, command.strip()))
    if cp.has_section("latency"):
        sc.latency = {s: int(_number(v)) for s, v in cp.items("latency")}
    if cp.has_section("run"):
        run = cp["run"]
        sc.horizon = int(run.get("horizon", sc.horizon))
        sc.seed = int(run.get("seed", sc.seed))
        sc.engine = run.get("engine", sc.engine)
    if cp.has_section("params"):
        sc.params = {k: parse_value(v) for k, v in cp.items("params")}
    return sc


def load(path: str | Path) -> Scenario:
    return parse(Path(path).read_text())


def dumps(topology: Topology, events: list[ScriptEvent] = (), horizon: int = 100) -> str:
    """Render a topology and script back into the text format."""
    lines = ["[routers]"]
    for r in sorted(topology.routers):
        lines.append(f"{r} = {', '.join(topology.routers[r])}")
    lines.append("")
    lines.append("[subnets]")
    for s in topology.subnets:
        entry = f"{s} = {', '.join(topology.interfaces_on(s))}"
        if topology.attrs.get(s):
            entry += " | " + " ".join(f"{k}={v}" for k, v in sorted(topology.attrs[s].items()))
        lines.append(entry)
    by_tick: dict[int, list[str]] = {}
    for ev in events:
        by_tick.setdefault(ev.time, []).append(_render(ev))
    if by_tick:
        lines += ["", "[events]"]
        lines += [f"{t} = {'; '.join(cmds)}" for t, cmds in sorted(by_tick.items())]
    lines += ["", "[run]", f"horizon = {horizon}", ""]
    return "\n".join(lines)


def _render(ev: ScriptEvent) -> str:
    a = ev.args
    if ev.kind == LINK:
        return f"{'up' if a[1] else 'down'} {a[0]}"
    if ev.kind == ROUTER:
        return f"router-{'up' if a[1] else 'down'} {a[0]}"
    if ev.kind == LATENCY:
        return f"latency {a[0]} {a[1]}"
    return f"send {a[0]} {a[1]}"

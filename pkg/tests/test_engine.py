import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvroute import oracle
from dvroute import topology as T
from dvroute.engine import (
    SYNCHRONOUS,
    Engine,
    latency_change,
    link_change,
    router_change,
    run,
    send_data,
    trace_lines,
)
from dvroute.protocols.base import Protocol, Row
from dvroute.protocols.rip import INFINITY, Rip
from dvroute.topology import TopologyError


class Probe(Protocol):
    """Logs every arrival and timer; pings on demand."""

    name = "probe"

    def __init__(self, router, topology, params=None):
        super().__init__(router, topology, params)
        self.log = []

    def start(self):
        if self.router == "A":
            self.set_timer(5, "t")
            self.set_timer(7, "cancelled")

    def on_timer(self, tag):
        self.log.append((self.now, "timer", tag))
        if tag == "t":
            self.cancel_timer("cancelled")

    def on_data(self, destination):
        self.send_to(destination, ("ping", self.now))

    def on_message(self, msg, sender, subnet):
        self.log.append((self.now, "msg", sender, msg))
        # causality: nothing arrives before it was sent
        assert msg[1] < self.now

    def table(self):
        return {"log": Row(len(self.log), None)}


def _probe_run(script, horizon=20, latency=None):
    eng = Engine(T.fig1_chain(), Probe)
    for s, d in (latency or {}).items():
        eng.set_latency(s, d)
    trace = eng.run(script, horizon)
    return eng, trace


def test_zero_horizon_gives_initial_snapshot_only():
    trace = run(T.fig1_chain(), lambda r, t: Rip(r, t), [], horizon=0)
    assert len(trace.snapshots) == 1
    assert trace.snapshots[0]["C"]["nC"].metric == 0


def test_default_latency_is_one_tick():
    eng, _ = _probe_run([send_data(3, "A", "B")])
    assert eng.nodes["B"].log == [(4, "msg", "A", ("ping", 3))]


def test_subnet_latency():
    eng, _ = _probe_run([send_data(3, "B", "C")], latency={"bc": 3})
    assert eng.nodes["C"].log[0][0] == 6


def test_latency_change_only_affects_later_sends():
    script = [send_data(2, "A", "B"), latency_change(2, "ab", 4), send_data(3, "A", "B")]
    eng, _ = _probe_run(sorted(script, key=lambda e: e.time))
    # the first send is already in flight when the change lands in the same tick
    assert [e[0] for e in eng.nodes["B"].log] == [3, 7]


@pytest.mark.parametrize("delay", [0, -1, 1.5])
def test_bad_latency_rejected(delay):
    eng = Engine(T.fig1_chain(), Probe)
    with pytest.raises(ValueError):
        eng.set_latency("ab", delay)


def test_timers_fire_and_cancel():
    eng, _ = _probe_run([])
    assert [e for e in eng.nodes["A"].log if e[1] == "timer"] == [(5, "timer", "t")]


def test_send_on_down_link_dropped_and_counted():
    _, trace = _probe_run([link_change(1, "ab", False), send_data(2, "A", "B")])
    assert sum(v for k, v in trace.dropped.items()) == 0  # no shared up link, nothing sent
    eng, trace = _probe_run([send_data(2, "A", "B"), link_change(2, "ab", False)])
    assert trace.dropped["tuple:link-down"] == 1
    assert eng.nodes["B"].log == []


@pytest.mark.parametrize(
    "event",
    [link_change(1, "nope", False), router_change(1, "Q", False), send_data(1, "A", "Q"), link_change(50, "ab", False)],
)
def test_bad_script_rejected(event):
    with pytest.raises((TopologyError, ValueError)):
        run(T.fig1_chain(), Probe, [event], horizon=20)


def test_engine_does_not_mutate_input_topology():
    topo = T.fig1_chain()
    run(topo, lambda r, t: Rip(r, t), [link_change(3, "ab", False)], horizon=5)
    assert topo.is_up("ab")


def test_router_down_takes_all_its_links():
    trace = run(T.fig1_chain(), lambda r, t: Rip(r, t), [router_change(5, "B", False)], horizon=10)
    assert trace.links_at(5) == {"ab": False, "bc": False, "nC": True}


def test_same_seed_byte_identical():
    def once():
        eng = Engine(T.random_connected(7), lambda r, t: Rip(r, t), seed=7)
        eng.set_loss(0.3)
        return "\n".join(trace_lines(eng.run([link_change(40, "R00-R06", False)], 150)))

    assert once() == once()


def test_different_seed_changes_lossy_run():
    def once(seed):
        eng = Engine(T.random_connected(7), lambda r, t: Rip(r, t), seed=seed)
        eng.set_loss(0.3)
        return trace_lines(eng.run([], 100))

    assert once(1) != once(2)


def test_trace_columns_and_removed_rows():
    lines = trace_lines(run(T.fig1_chain(), lambda r, t: Rip(r, t), [link_change(10, "nC", False)], horizon=400))
    assert lines[0] == "tick,router,destination,metric,next_hop,annotations"
    assert any(line.endswith(",removed") for line in lines)


def test_fig1_synchronous_converges_by_diameter():
    topo = T.fig1_chain()
    trace = run(topo, lambda r, t: Rip(r, t), mode=SYNCHRONOUS, horizon=10)
    tick = oracle.convergence_tick(trace, oracle.shortest_paths(topo, cap=INFINITY), INFINITY)
    assert tick == topo.diameter() == 2


def _bellman_ford_rounds(topo, rounds):
    """Independent synchronous Bellman-Ford: round k uses only round k-1."""
    dist = [{r: {s: 0 for s in topo.attached(r)} for r in topo.routers}]
    for _ in range(rounds):
        prev = dist[-1]
        cur = {}
        for r in topo.routers:
            row = dict(prev[r])
            for n, _ in topo.neighbors(r):
                for s, m in prev[n].items():
                    if m + 1 < row.get(s, INFINITY):
                        row[s] = m + 1
            cur[r] = row
        dist.append(cur)
    return dist


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 5000))
def test_synchronous_rounds_match_bellman_ford(seed):
    topo = T.random_connected(seed, n_max=10)
    horizon = topo.diameter() + 2
    trace = run(topo, lambda r, t: Rip(r, t), mode=SYNCHRONOUS, horizon=horizon)
    expected = _bellman_ford_rounds(topo, horizon)
    for k in range(horizon + 1):
        got = {r: {d: row.metric for d, row in trace.snapshots[k][r].items()} for r in topo.routers}
        assert got == expected[k], f"round {k}"

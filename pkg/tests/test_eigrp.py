import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st
from runs import corpus_run

from dvroute import oracle
from dvroute import topology as T
from dvroute.engine import link_change, run
from dvroute.protocols.base import INF, Send
from dvroute.protocols.eigrp import ACTIVE, PASSIVE, Eigrp, VectorMetric, composite_metric

DELAY_ONLY = (0, 0, 1, 0, 0)  # metric = 256 * delay, easy to reason about
U = 256


class TestCompositeMetric:
    def test_default_k(self):
        assert composite_metric(VectorMetric(100, 10)) == 28160

    def test_k5_zero_ignores_reliability(self):
        assert composite_metric(VectorMetric(100, 10, reliability=1)) == 28160

    def test_k5_term(self):
        v = VectorMetric(100, 10, reliability=200)
        assert composite_metric(v, (1, 0, 1, 55, 1)) == pytest.approx(110 * 1 / (55 + 200) * 256)

    def test_all_zero_weights(self):
        assert composite_metric(VectorMetric(100, 10), (0, 0, 0, 0, 0)) == 0

    def test_load_term(self):
        assert composite_metric(VectorMetric(100, 10, load=128), (1, 1, 1, 0, 0)) == (100 + 100 / 128 + 10) * 256

    def test_load_256_rejected(self):
        with pytest.raises(ValueError):
            composite_metric(VectorMetric(100, 10, load=256), (1, 1, 1, 0, 0))

    def test_hop_cap(self):
        assert composite_metric(VectorMetric(100, 10, hop_count=101)) == INF
        assert composite_metric(VectorMetric(100, 10, hop_count=100)) < INF

    @given(st.floats(1, 1e6), st.floats(0, 1e6), st.floats(1, 1e6), st.floats(0, 1e6))
    def test_monotone_in_delay_and_bandwidth_term(self, bw, d, bw2, d2):
        a = VectorMetric(bw, d)
        b = a.extend(VectorMetric(bw2, d2))
        assert composite_metric(b) >= composite_metric(a)


def _x():
    """X has neighbors K and J; both can reach subnet ``kd`` through K."""
    topo = T.build([("xk", "XK"), ("xj", "XJ"), ("kd", "KD"), ("jk", "JK")])
    x = Eigrp("X", topo, {"k": DELAY_ONLY})
    x.start()
    x.drain()
    return x


class TestLocalCompute:
    def test_feasible_successor_adopted(self):
        x = _x()
        e = x._entry("kd")
        e.feasible_distance = 5 * U
        x.handle_update("kd", "K", VectorMetric(100, 4))
        assert (e.state, e.successor, e.distance) == (PASSIVE, "K", 5 * U)

    def test_equal_report_is_not_feasible(self):
        x = _x()
        x.handle_update("kd", "K", VectorMetric(100, 4))
        e = x.entries["kd"]
        assert e.feasible_distance == 5 * U
        x.handle_update("kd", "K", None)  # successor withdraws
        x.drain()
        x.handle_update("kd", "J", VectorMetric(100, 5))
        assert e.state == ACTIVE

    def test_babel_diagram_starves_into_active(self):
        trace = run(T.babel_diagram(), lambda r, t: Eigrp(r, t), [link_change(30, "as", False)], horizon=60)
        assert (30, "A", "active nS") in trace.notes
        truth = oracle.shortest_paths(oracle.final_topology(T.babel_diagram(), trace), oracle.COMPOSITE)
        assert oracle.mismatches(trace.snapshots[-1], truth) == []


class TestReplies:
    def _active(self):
        x = _x()
        x.handle_update("kd", "K", VectorMetric(100, 1))
        x.handle_update("kd", "J", VectorMetric(100, 3))
        x.drain()
        # K's path gets worse than FD; J is not feasible either
        x.handle_update("kd", "K", VectorMetric(100, 9))
        e = x.entries["kd"]
        assert e.state == ACTIVE and e.pending_replies == {"J", "K"}
        x.drain()
        return x, e

    def test_partial_reply_keeps_active(self):
        x, e = self._active()
        x.handle_reply("kd", "J", VectorMetric(100, 3))
        assert e.state == ACTIVE and e.pending_replies == {"K"}
        assert [m for m in x.drain() if isinstance(m, Send)] == []

    def test_last_reply_goes_passive_with_new_fd(self):
        x, e = self._active()
        x.handle_reply("kd", "J", VectorMetric(100, 3))
        x.handle_reply("kd", "K", VectorMetric(100, 9))
        assert e.state == PASSIVE
        assert e.successor == "J" and e.distance == e.feasible_distance == 4 * U

    def test_all_unreachable_removes_destination(self):
        x, e = self._active()
        x.handle_reply("kd", "J", None)
        x.handle_reply("kd", "K", None)
        # worse than the queried distance: one more diffusion announces infinity
        assert e.state == ACTIVE and e.pending_replies == {"J", "K"} and e.query_distance == INF
        x.handle_reply("kd", "J", None)
        x.handle_reply("kd", "K", None)
        assert e.state == PASSIVE and e.distance == INF
        assert "kd" not in x.table()

    def test_unexpected_reply_counted(self):
        x = _x()
        x.handle_reply("kd", "K", VectorMetric(100, 1))
        assert x.counters["reply-unexpected"] == 1


def _independent_composite(topo):
    """networkx Dijkstra over delays; all corpus links have bandwidth 100."""
    g = nx.Graph()
    for s in topo.subnets:
        rs = topo.routers_on(s)
        if topo.is_up(s) and len(rs) == 2:
            g.add_edge(*rs, weight=topo.attrs[s]["delay"])
    g.add_nodes_from(topo.routers)
    dist = dict(nx.all_pairs_dijkstra_path_length(g))
    out = {}
    for r in topo.routers:
        for s in topo.subnets:
            best = min(
                (dist[r].get(x, INF) + topo.attrs[s]["delay"] for x in topo.routers_on(s) if topo.is_up(s)),
                default=INF,
            )
            out[(r, s)] = (100 + best) * 256 if best < INF else INF
    return out


@pytest.mark.parametrize("seed", range(0, 50, 7))
def test_converged_distances_match_independent_oracle(seed):
    out = corpus_run("eigrp", seed)
    final = oracle.final_topology(out.scenario.topology, out.trace)
    expected = _independent_composite(final)
    snap = out.trace.snapshots[-1]
    for (r, s), m in expected.items():
        row = snap[r].get(s)
        got = INF if row is None else row.metric
        assert got == pytest.approx(m), (r, s)


@pytest.mark.parametrize("seed", range(0, 50, 5))
def test_feasible_successor_lists_capped_at_four(seed):
    for snap in corpus_run("eigrp", seed).trace.snapshots:
        for table in snap.values():
            for row in table.values():
                assert row.get("fs") <= 4

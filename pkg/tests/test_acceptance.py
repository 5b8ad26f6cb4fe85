"""Acceptance criteria 1-9, one test each.

Every test records a PASS/FAIL line through ``runs.record``; the conftest
prints them together at the end of the session.
"""

from __future__ import annotations

import time

from runs import SEEDS, corpus_run, record

from dvroute import corpus, oracle, registry
from dvroute import topology as T
from dvroute.engine import SYNCHRONOUS, Engine, link_change, run, trace_lines
from dvroute.protocols.babel import Babel
from dvroute.protocols.eigrp import VectorMetric, composite_metric
from dvroute.protocols.rip import INFINITY, Rip
from dvroute.protocols.ripmti import RipMti
from dvroute.protocols.riptree import RipTree


def _metrics(trace, router, dest, ticks):
    out = []
    for t in ticks:
        row = trace.snapshots[t][router].get(dest)
        out.append(None if row is None else row.metric)
    return out


def _climb(trace, dest, start):
    """Metric changes at A and B after ``start``, merged in tick order."""
    seen = []
    prev = {r: _metrics(trace, r, dest, [start - 1])[0] for r in "AB"}
    for t in range(start, len(trace.snapshots)):
        for r in ("B", "A"):
            row = trace.snapshots[t][r].get(dest)
            m = None if row is None else row.metric
            if m != prev.get(r):
                prev[r] = m
                if m is not None and m < INFINITY:
                    seen.append((t, r, m))
    return seen


def test_criterion_1_fig1_count_to_infinity():
    t0 = time.perf_counter()
    fail = 30
    trace = run(T.fig1_chain(), lambda r, t: Rip(r, t), [link_change(fail, "bc", False)], horizon=120)
    climb = _climb(trace, "nC", fail)
    metrics = [m for _, _, m in climb]
    both_dead = next(
        t
        for t in range(fail, len(trace.snapshots))
        if all(_metrics(trace, r, "nC", [t])[0] in (None, INFINITY) for r in "AB")
        and all(_metrics(trace, r, "nC", [u])[0] in (None, INFINITY) for r in "AB" for u in range(t, len(trace.snapshots)))
    )
    rounds = both_dead - fail
    elapsed = time.perf_counter() - t0
    ok = metrics == list(range(3, INFINITY)) and rounds <= 14 and elapsed < 1
    record(1, ok, f"climb {metrics[:3]}..{metrics[-1]}, both at 16 after {rounds} rounds, {elapsed:.2f}s")


def test_criterion_2_fig2_mitigation_matrix():
    t0 = time.perf_counter()
    script = [link_change(30, "n", False), link_change(35, "n", True)]

    def loops(mit):
        tr = run(T.fig2_triangle(), lambda r, t: Rip(r, t, {"mitigation": mit}), script, horizon=200)
        return tr, oracle.loop_episodes(tr, INFINITY)

    _, sh = loops(("split-horizon",))
    _, pr = loops(("poisoned-reverse",))
    hd_trace, hd = loops(("hold-down",))
    # stub back at 35, hold-down armed at 31 for 60 ticks
    expiry = {r: dict(hd_trace.snapshots[36][r]["n"].extra).get("hold") for r in "AB"}
    restored = {
        r: next(t for t in range(36, len(hd_trace.snapshots)) if hd_trace.snapshots[t][r]["n"].metric < INFINITY)
        for r in "AB"
    }
    elapsed = time.perf_counter() - t0
    ok = bool(sh) and bool(pr) and not hd and restored == expiry == {"A": 91, "B": 91} and elapsed < 1
    record(
        2,
        ok,
        f"split horizon {len(sh)} loop(s), poisoned reverse {len(pr)}, hold-down {len(hd)}; "
        f"restored at {restored}, timer expiry {expiry}, {elapsed:.2f}s",
    )


def test_criterion_3_synchronous_bound():
    t0 = time.perf_counter()
    late = []
    largest = 0
    for seed in SEEDS:
        topo = T.random_connected(seed)
        largest = max(largest, len(topo.routers))
        trace = run(topo, lambda r, t: Rip(r, t), mode=SYNCHRONOUS, horizon=25, seed=seed)
        tick = oracle.convergence_tick(trace, oracle.shortest_paths(topo, cap=INFINITY), INFINITY)
        if tick is None or tick > topo.diameter():
            late.append((seed, tick, topo.diameter()))
    elapsed = time.perf_counter() - t0
    ok = not late and largest <= 20 and elapsed < 30
    record(3, ok, f"{len(SEEDS)} topologies (up to {largest} routers), over the bound: {late}, {elapsed:.1f}s")


def test_criterion_4_aodv_loop_freedom():
    t0 = time.perf_counter()
    cycles = violations = 0
    for seed in SEEDS:
        out = corpus_run("aodv", seed)
        cycles += len(out.loops)
        violations += len(out.violations())
    elapsed = time.perf_counter() - t0
    ok = cycles == 0 and violations == 0 and elapsed < 60
    record(4, ok, f"{len(SEEDS)} seeds: {cycles} cycles, {violations} invariant violations, {elapsed:.1f}s")


def test_criterion_5_eigrp_snc():
    t0 = time.perf_counter()
    violations = cycles = 0
    unconverged = []
    for seed in SEEDS:
        out = corpus_run("eigrp", seed)
        violations += len(out.violations())
        cycles += len(out.loops)
        if out.converged_at is None:
            unconverged.append(seed)
    units = [
        composite_metric(VectorMetric(bandwidth=100, delay=10)) == 28160,
        composite_metric(VectorMetric(bandwidth=100, delay=10, reliability=1), k=(1, 0, 1, 0, 0)) == 28160,
        composite_metric(VectorMetric(bandwidth=100, delay=10), k=(0, 0, 0, 0, 0)) == 0,
    ]
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and cycles == 0 and not unconverged and all(units)
    record(
        5,
        ok,
        f"{violations} FD/FS violations, {cycles} cycles, unconverged {unconverged}, "
        f"composite units {sum(units)}/{len(units)}, {elapsed:.1f}s",
    )


def _babel_recovers(trace) -> bool:
    row = trace.snapshots[-1]["A"].get("S")
    return row is not None and row.metric < oracle.INF and row.next_hop == "B" and row.get("seq") == 138


def test_criterion_6_babel_starvation():
    params = {"initial_seqno": {"S": 137}, "request_retries": 3}
    script = [link_change(30, "as", False)]
    trace = run(T.babel_diagram(), lambda r, t: Babel(r, t, params), script, horizon=60)
    notes = [text for _, r, text in trace.notes if r == "A"]
    starved = any("starved for S" in n for n in notes)
    requested = any("requesting seqno 138" in n for n in notes)
    clean = starved and requested and _babel_recovers(trace)

    recovered = 0
    for seed in range(100):
        lossy = run(
            T.babel_diagram(),
            lambda r, t: Babel(r, t, params),
            script,
            horizon=60,
            seed=seed,
            loss=0.2,
            loss_kinds=["SEQNO_REQUEST"],
        )
        recovered += _babel_recovers(lossy)
    ok = clean and recovered >= 95
    record(
        6,
        ok,
        f"starved={starved} requested 138={requested} recovered via B at 138={_babel_recovers(trace)}; "
        f"20% request loss: {recovered}/100 recovered",
    )


def test_criterion_7_rip_mti():
    script = [link_change(30, "n", False), link_change(35, "n", True)]
    plain = run(T.fig2_triangle(), lambda r, t: Rip(r, t), script, horizon=200)
    strict = run(T.fig2_triangle(), lambda r, t: RipMti(r, t, {"mode": "strict"}), script, horizon=200)
    plain_loops = len(oracle.loop_episodes(plain, INFINITY))
    strict_loops = len(oracle.loop_episodes(strict, INFINITY))

    topo = T.fig2_triangle()
    eng = Engine(topo, lambda r, t: RipMti(r, t, {"mode": "strict"}))
    eng.run([], 40)
    tables_ok = all(eng.nodes[r].tables.msilm == oracle.simple_loop_metrics(topo, r) for r in topo.routers) and all(
        eng.nodes[r].tables.mrpm == oracle.min_return_metrics(oracle.simple_loop_metrics(topo, r)) for r in topo.routers
    )

    both = 0
    slower = []
    for seed in SEEDS:
        p = corpus_run("rip", seed).converged_at
        s = corpus_run("rip-mti", seed, (("mode", "strict"),)).converged_at
        if p is not None and s is not None:
            both += 1
            if s > p:
                slower.append((seed, p, s))
    ok = strict_loops == 0 and plain_loops >= 1 and tables_ok and not slower
    record(
        7,
        ok,
        f"Fig. 2 loops plain {plain_loops} strict {strict_loops}; tables match oracle={tables_ok}; "
        f"strict slower than plain on {slower} of {both} scenarios where both converge",
    )


def test_criterion_8_rip_tree():
    corpus_loops = [(seed, len(corpus_run("rip-tree", seed).loops)) for seed in SEEDS]
    corpus_loops = [x for x in corpus_loops if x[1]]

    spans = {}
    for h in (2, 3, 4):
        trace = run(T.balanced_tree(h), lambda r, t: RipTree(r, t), [link_change(40, "n", False)], horizon=120)
        started = next(t for t, r, text in trace.notes if r == "R" and text.startswith("invalidation n") and "started" in text)
        done = next(t for t, r, text in trace.notes if r == "R" and text.startswith("invalidation n") and "complete" in text)
        spans[h] = done - started
    bound_ok = all(spans[h] <= 2 * h for h in spans)

    topo = T.two_subtrees()
    script = [link_change(40, "ab", False), link_change(50, "ad", False), link_change(120, "ab", True)]
    trace = run(topo, lambda r, t: RipTree(r, t), script, horizon=250)
    truth = oracle.shortest_paths(oracle.final_topology(topo, trace), cap=INFINITY)
    two = oracle.convergence_tick(trace, truth, INFINITY)
    two_loops = len(oracle.loop_episodes(trace, INFINITY))

    ok = not corpus_loops and bound_ok and two is not None and two_loops == 0
    record(
        8,
        ok,
        f"corpus seeds with loops {corpus_loops}; completion span by depth {spans} (bound 2h); "
        f"two-subtree run converged at {two} with {two_loops} loops",
    )


def test_criterion_9_determinism():
    mismatched = []
    cases = [("rip", {}), ("rip-mti", {"mode": "careful"}), ("rip-tree", {}), ("aodv", {}), ("eigrp", {}), ("babel", {})]
    for name, params in cases:
        for seed in (3, 7):
            sc = corpus.scenario(seed, vector=name == "eigrp", data=name == "aodv")
            texts = []
            for _ in range(2):
                eng = Engine(sc.topology, registry.factory(name, params), seed=seed)
                eng.set_loss(0.1)
                texts.append("\n".join(trace_lines(eng.run(sc.script, sc.horizon))).encode())
            if texts[0] != texts[1]:
                mismatched.append((name, seed))
    record(9, not mismatched, f"{len(cases) * 2} replays with 10% seeded loss, byte mismatches: {mismatched}")

"""Acceptance suite: one test per criterion, named test_criterion_NN."""
import dataclasses
import time

import networkx as nx
import pytest

from gridrestore import ccg_solve, enumerate_oracle, solve_deterministic, validate_schedule
from gridrestore.cyber import ups_alive
from gridrestore.network import reduce_network
from gridrestore.report import build_report, dumps
from gridrestore.validate import simulate_routes

from conftest import CAPPED, with_budget, with_omega

TIGHT = 1e-6


@pytest.mark.parametrize("seed,shape", CAPPED, ids=[f"seed{s}" for s, _ in CAPPED])
def test_criterion_01_oracle_equivalence(seed, shape):
    from gridrestore import random_capped

    inst = random_capped(seed, **shape)
    t0 = time.perf_counter()
    oracle = enumerate_oracle(inst)
    t_oracle = time.perf_counter() - t0
    t0 = time.perf_counter()
    robust = ccg_solve(inst)
    t_ccg = time.perf_counter() - t0
    rel = abs(robust.objective - oracle.objective) / max(oracle.objective, 1e-9)
    assert rel <= 1e-3, (robust.objective, oracle.objective)
    assert t_ccg < 60 and t_oracle < 60


def test_criterion_02_deterministic_collapse(desk, capped_instances):
    for inst in [desk, capped_instances[0], capped_instances[4]]:
        rep = ccg_solve(with_omega(inst, 0.0))
        assert rep.converged
        assert rep.iterations <= 2
        assert rep.gap <= 1e-6


def test_criterion_03_bound_monotonicity(all_solves):
    for _, rep in all_solves:
        lows = [e["lower"] for e in rep.trace]
        ups = [e["upper"] for e in rep.trace]
        assert all(b >= a - 1e-9 for a, b in zip(lows, lows[1:]))
        assert all(b <= a + 1e-9 for a, b in zip(ups, ups[1:]))
        assert all(lo <= up * (1 + 1e-6) + 1e-6 for lo, up in zip(lows, ups))


def test_criterion_04_spot_checks(anchors):
    # UPS of 300 min with 30 min slots keeps a router alive in slots 1-10 only
    assert [ups_alive(300, t, 30) for t in range(1, 13)] == [1] * 10 + [0, 0]

    ncg = reduce_network(anchors.network)
    tl = simulate_routes(anchors, {"RC1": ["L3", "L4"], "RC2": ["L6"]}, {"OC1": ["MS1"]}, ncg)
    assert tl.switch_clear["RCS1"] == pytest.approx(182)
    assert tl.manual_arrive["MS1"] == pytest.approx(11)
    assert tl.manual_start["MS1"] == pytest.approx(232)
    assert tl.manual_done["MS1"] == pytest.approx(242)

    x = solve_deterministic(anchors).schedule
    assert x.route("xr", "RC1") == ["L3", "L4"] and x.route("xr", "RC2") == ["L6"]
    assert x.get(("Trcs", "RCS1")) + 2 == pytest.approx(184)
    assert x.timeline("wRCS", "L2", anchors.slots).index(1) + 1 == 8
    assert x.get(("Tms", "MS1")) == pytest.approx(232)
    assert x.get(("tE_o", "MS1")) == pytest.approx(242)
    assert x.timeline("wMS", "L5", anchors.slots).index(1) + 1 == 10
    assert x.timeline("uUPS", "F3", anchors.slots) == [1] * 10 + [0, 0]


def test_criterion_05_budget_enforcement(all_solves, res_island):
    for inst, rep in all_solves:
        for u in inst.uncertainty.res:
            assert rep.worst_scenario.used_budget(u.source) <= u.budget + 1e-9
    rep = next(r for i, r in all_solves if i is res_island)
    (u,) = res_island.uncertainty.res
    assert (u.budget, res_island.horizon.slots, u.max_error) == (5, 15, 0.3)
    assert rep.worst_scenario.used_budget(u.source) == pytest.approx(5, abs=1e-9)


def test_criterion_06_validator_equivalence(all_solves):
    for inst, rep in all_solves:
        check = validate_schedule(inst, rep.schedule, rep.worst_scenario)
        assert check.violations == []
        assert check.objective == pytest.approx(rep.upper_bound, rel=1e-6, abs=1e-6)


def test_criterion_07_radiality(all_solves):
    for inst, rep in all_solves:
        ncg = reduce_network(inst.network)
        x = rep.schedule
        for t in inst.slots:
            g = nx.Graph()
            g.add_nodes_from(c.id for c in ncg.cells)
            closed = [e for e in ncg.edges if x.flag(("w", e.line, t))]
            g.add_edges_from((e.a, e.b) for e in closed)
            assert nx.is_forest(g) and g.number_of_edges() == len(closed)
            comps = list(nx.connected_components(g))
            for comp in comps:
                assert sum(x.flag(("xi", c, t)) for c in comp) == 1
            assert len(ncg.cells) == len(closed) + len(comps)


def test_criterion_08_directional_claims(desk):
    full = ccg_solve(desk, tolerance=TIGHT).objective
    net = desk.network
    no_der = desk.with_changes(
        network=dataclasses.replace(net, sources=tuple(s for s in net.sources if s.kind == "substation")),
        uncertainty=dataclasses.replace(desk.uncertainty, res=()))
    blackout = desk.with_changes(cyber=dataclasses.replace(desk.cyber, blackout_slots=10))
    bench_1 = ccg_solve(no_der, tolerance=TIGHT).objective
    bench_2 = ccg_solve(blackout, tolerance=TIGHT).objective
    assert bench_1 > full
    assert bench_2 > full


def test_criterion_09_robust_dominance(all_solves, res_island):
    for inst, rep in all_solves:
        det = solve_deterministic(inst).objective
        assert rep.objective >= det * (1 - 1e-6) - 1e-6
    values = [ccg_solve(with_budget(res_island, b), tolerance=TIGHT).objective for b in (0, 1, 3, 5)]
    assert all(b >= a - 1e-6 * abs(a) for a, b in zip(values, values[1:]))
    assert values[-1] > values[0]


def test_criterion_10_determinism(desk):
    first = dumps(build_report(desk, ccg_solve(desk, seed=3)))
    second = dumps(build_report(desk, ccg_solve(desk, seed=3)))
    assert first.encode() == second.encode()

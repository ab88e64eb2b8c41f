"""Brute-force min-max reference for desk-sized instances.

Every crew itinerary is enumerated and replayed exactly. For each one the
remaining choices (router power and availability, remote closings) and one
operation copy per vertex of the deviation polytope go into a single
extensive MILP: min theta with theta >= cost of every vertex.

Why vertices are enough: the recourse value is the optimum of an LP whose
right-hand side is affine in the net deviation d = up - down, so it is convex
in d, and a convex function attains its maximum over a polytope at a vertex.
With an integer budget B the set {|d_t| <= 1, sum |d_t| <= B} has as vertices
exactly the sign vectors with min(B, T) entries at +-1 and the rest at 0.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

from .crews import all_tasks, cluster_tasks
from .cyber import LINKED_ROLES, derive_cyber_links, ups_alive
from .grid import Scenario, materialize_uncertainty
from .instance import Instance
from .network import reduce_network
from .recourse import Col, LinearSystem, add_operation, operating_cost
from .validate import Timeline, simulate_routes, slot_reached

logger = logging.getLogger(__name__)

CAPS = {"faults": 3, "crews": 2, "switches": 3, "slots": 8, "res": 2, "vertices": 64}


class OracleRefused(ValueError):
    pass


@dataclass
class OracleResult:
    objective: float
    repair_routes: dict[str, list[str]]
    operating_routes: dict[str, list[str]]
    timeline: Timeline
    evaluated: int
    worst: Scenario | None = None
    remote_close: dict[str, int | None] = field(default_factory=dict)


def budget_vertices(inst: Instance) -> list[Scenario]:
    """Vertices of the per-source deviation polytope, as scenarios."""
    T = inst.horizon.slots
    per_source = []
    for u in inst.uncertainty.res:
        if abs(u.budget - round(u.budget)) > 1e-9:
            raise OracleRefused(f"{u.source}: the vertex enumeration needs an integer budget")
        k = min(int(round(u.budget)), T)
        options = []
        if u.max_error == 0 or k == 0:
            options.append(((0,) * T))
        else:
            for support in itertools.combinations(range(T), k):
                for signs in itertools.product((1, -1), repeat=k):
                    d = [0] * T
                    for pos, sg in zip(support, signs):
                        d[pos] = sg
                    options.append(tuple(d))
        per_source.append((u.source, options))
    total = math.prod(len(o) for _, o in per_source) if per_source else 1
    if total > CAPS["vertices"]:
        raise OracleRefused(f"{total} polytope vertices exceed the cap of {CAPS['vertices']}")
    out = []
    for combo in itertools.product(*[o for _, o in per_source]):
        up, down = {}, {}
        for (src, _), d in zip(per_source, combo):
            up[src] = tuple(float(v > 0) for v in d)
            down[src] = tuple(float(v < 0) for v in d)
        out.append(Scenario(up, down))
    return out


def _check_caps(inst: Instance) -> None:
    net = inst.network
    checks = [("faults", len(net.faults)), ("crews", len(inst.crews.repair)),
              ("crews", len(inst.crews.operating)), ("switches", len(inst.operating_tasks)),
              ("slots", inst.horizon.slots), ("res", len(inst.uncertainty.res))]
    for name, value in checks:
        if value > CAPS[name]:
            raise OracleRefused(f"{name}: {value} exceeds the oracle cap of {CAPS[name]}")


def _itineraries(tasks_by_crew: dict[str, tuple[str, ...]], tasks: tuple[str, ...], optional: bool):
    """Every assignment of tasks to allowed crews, then every visiting order."""
    crews = list(tasks_by_crew)
    choices = []
    for task in tasks:
        owners = [c for c in crews if task in tasks_by_crew[c]]
        choices.append(owners + ([None] if optional else []))
    for assignment in itertools.product(*choices):
        groups = {c: [t for t, a in zip(tasks, assignment) if a == c] for c in crews}
        for orders in itertools.product(*[itertools.permutations(groups[c]) for c in crews]):
            yield {c: list(o) for c, o in zip(crews, orders)}


def enumerate_oracle(inst: Instance, cluster: bool = True, final_merge: bool = True) -> OracleResult:
    _check_caps(inst)
    ncg = reduce_network(inst.network)
    if len(ncg.edges) != len(ncg.cells) - 1 or not _connected(ncg):
        raise OracleRefused("the oracle needs the cells to form a tree")
    vertices = budget_vertices(inst)
    clusters = cluster_tasks(inst) if cluster else all_tasks(inst)
    if any(not clusters.repair_crews_for(f) for f in inst.network.faults):
        raise OracleRefused("a fault has no repair crew")
    links = derive_cyber_links(inst.cyber) if inst.cyber.routers else {}

    best: OracleResult | None = None
    evaluated = 0
    for repair in _itineraries(clusters.repair, inst.network.faults, optional=False):
        for operate in _itineraries(clusters.operating, inst.operating_tasks, optional=True):
            tl = simulate_routes(inst, repair, operate, ncg)
            value, decisions, remote = _price(inst, ncg, tl, vertices, links, final_merge)
            evaluated += 1
            if value is None:
                continue
            if best is None or value < best.objective - 1e-9:
                best = OracleResult(value, repair, operate, tl, 0, None, remote)
                best_decisions = decisions
    if best is None:
        raise OracleRefused("no itinerary admits a feasible operation")
    best.evaluated = evaluated
    best.worst = _binding_vertex(inst, ncg, best.timeline, vertices, best_decisions, best.objective)
    return best


def _connected(ncg) -> bool:
    seen = {ncg.cells[0].id}
    grew = True
    while grew:
        grew = False
        for e in ncg.edges:
            if (e.a in seen) != (e.b in seen):
                seen |= {e.a, e.b}
                grew = True
    return len(seen) == len(ncg.cells)


def _price(inst: Instance, ncg, tl: Timeline, vertices: list[Scenario], links: dict, final_merge: bool):
    hz = inst.horizon
    slots = list(inst.slots)
    T = hz.slots
    cyber = inst.cyber
    sys_ = LinearSystem()
    theta = sys_.column(0.0, math.inf, cost=1.0)

    uc, e_col = {}, {}
    for r in cyber.routers:
        for t in slots:
            if r.role == "control-centre":
                uc[r.id, t] = 1.0
                continue
            ups = ups_alive(r.ups_minutes, t, hz.slot_minutes)
            cleared = int(slot_reached(inst, tl.cell_clear[ncg.cell_of_node[r.node]], t))
            e = sys_.binary()
            e_col[r.id, t] = e
            sys_.constrain([(1.0, e)], lo=ups, hi=min(1, cleared + ups))
            if t <= cyber.blackout_slots or (r.role in LINKED_ROLES and not links.get(r.id)):
                uc[r.id, t] = 0.0
                continue
            uc[r.id, t] = sys_.binary()
            sys_.constrain([(1.0, uc[r.id, t]), (-1.0, e)], hi=0.0)
    for r in cyber.routers:
        if r.role not in LINKED_ROLES or not links.get(r.id):
            continue
        for t in slots:
            if not isinstance(uc[r.id, t], Col):
                continue
            ks = []
            for path in links[r.id]:
                lk = sys_.binary()
                ks.append(lk)
                sys_.constrain([(1.0, lk)] + [(-1.0 / len(path), uc[c, t]) for c in path], hi=0.0)
            sys_.constrain([(1.0, uc[r.id, t])] + [(-1.0, lk) for lk in ks], hi=0.0)

    closed: dict[tuple[str, int], float | Col] = {}
    remote_cols: dict[str, list] = {}
    for edge in ncg.edges:
        sw = inst.network.switch_line(edge.switch).switch
        controller = cyber.controller_of(edge.switch) if cyber.routers else None
        manual_done = tl.manual_done.get(edge.switch, math.inf)
        ready = tl.switch_clear[edge.switch] + sw.remote_minutes
        prev = None
        cols = []
        for t in slots:
            manual = slot_reached(inst, manual_done, t)
            wr: float | Col = 0.0
            if edge.kind == "RCS" and controller is not None and slot_reached(inst, ready, t):
                wr = sys_.binary()
                step = [(1.0, wr), (-1.0, uc[controller.id, t])]
                if prev is not None:
                    sys_.constrain([(1.0, wr), (-1.0, prev)], lo=0.0)
                    step.append((-1.0, prev))
                sys_.constrain(step, hi=0.0)
                prev = wr
            cols.append(wr)
            closed[edge.line, t] = 1.0 if manual else wr
        remote_cols[edge.line] = cols
        if final_merge:
            last = closed[edge.line, T]
            if isinstance(last, Col):
                sys_.lb[last.j] = 1.0
            elif last < 0.5:
                return None, None, None

    def status_for(kind: str, key: str, t: int):
        if kind == "uNC":
            return float(slot_reached(inst, tl.cell_clear[key], t))
        if kind == "w":
            return closed[key, t]
        if kind == "e":
            return e_col[key, t]
        return float(ups_alive(cyber.router(key).ups_minutes, t, hz.slot_minutes))

    hours = hz.slot_minutes / 60.0
    for scen in vertices:
        available = materialize_uncertainty(inst.uncertainty, scen)
        cols = add_operation(sys_, inst, ncg.cell_of_node, status_for, available, cost_scale=0.0)
        pen = {n.id: n.penalty for n in inst.network.nodes}
        sys_.constrain([(1.0, Col(theta))] + [(-pen[n] * hours, Col(j)) for (n, _), j in cols["shed"].items()],
                       lo=0.0)
    res = sys_.solve()
    if res.status != 0:
        return None, None, None
    value = float(res.fun)
    remote = {}
    for line, cols in remote_cols.items():
        first = None
        for t, c in zip(slots, cols):
            if isinstance(c, Col) and res.x[c.j] > 0.5:
                first = t
                break
        remote[line] = first
    decisions = {
        "closed": {k: (float(round(res.x[v.j])) if isinstance(v, Col) else v) for k, v in closed.items()},
        "e": {k: float(round(res.x[v.j])) for k, v in e_col.items()},
    }
    return value, decisions, remote


def _binding_vertex(inst: Instance, ncg, tl: Timeline, vertices: list[Scenario], decisions: dict,
                    value: float) -> Scenario | None:
    """Vertex whose operating cost equals the min-max value, for reporting."""
    hz = inst.horizon

    def status(kind, key, t):
        if kind == "uNC":
            return float(slot_reached(inst, tl.cell_clear[key], t))
        if kind == "w":
            return decisions["closed"][key, t]
        if kind == "e":
            return decisions["e"][key, t]
        return float(ups_alive(inst.cyber.router(key).ups_minutes, t, hz.slot_minutes))

    worst, best_gap = None, math.inf
    for scen in vertices:
        cost, _ = operating_cost(inst, ncg.cell_of_node, status, materialize_uncertainty(inst.uncertainty, scen))
        if cost is not None and abs(cost - value) < best_gap:
            best_gap, worst = abs(cost - value), scen
    return worst

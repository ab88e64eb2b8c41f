"""Independent re-simulation of a restoration schedule.

Crew routes are replayed event by event with exact completion minutes, status
timelines and cyber gates are recomputed from those times, topology is checked
with a union-find per slot and the operating cost comes from the separate
model in :mod:`gridrestore.recourse`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .cyber import LINKED_ROLES, derive_cyber_links, ups_alive
from .decision import DEPOT, FirstStageDecision
from .grid import InvalidScenarioError, Scenario, check_scenario, materialize_uncertainty
from .instance import Instance
from .network import NodeCellGraph, reduce_network, travel_minutes
from .recourse import operating_cost

logger = logging.getLogger(__name__)

CELL_CLEAR_EMPTY = 0.0


@dataclass(frozen=True)
class Violation:
    family: str  # I, II or III
    kind: str
    entity: str
    slot: int | None
    message: str

    def __str__(self) -> str:
        where = f"{self.entity}@{self.slot}" if self.slot is not None else self.entity
        return f"[{self.family}] {self.kind} {where}: {self.message}"


@dataclass
class Timeline:
    """Exact event minutes recomputed from the crew routes."""

    repair_arrive: dict[str, float] = field(default_factory=dict)
    repair_done: dict[str, float] = field(default_factory=dict)
    repair_crew: dict[str, str] = field(default_factory=dict)
    cell_clear: dict[str, float] = field(default_factory=dict)
    switch_clear: dict[str, float] = field(default_factory=dict)
    manual_arrive: dict[str, float] = field(default_factory=dict)
    manual_start: dict[str, float] = field(default_factory=dict)
    manual_done: dict[str, float] = field(default_factory=dict)
    manual_crew: dict[str, str] = field(default_factory=dict)
    itineraries: dict[str, list[dict]] = field(default_factory=dict)


@dataclass
class ValidationResult:
    feasible: bool
    objective: float
    violations: list[Violation]
    timeline: Timeline
    operation: dict | None = None


def slot_reached(inst: Instance, minute: float, t: int) -> bool:
    """True when 1-based slot ``t`` starts at or after ``minute``."""
    return inst.horizon.slot_start(t) >= minute - 1e-9


def simulate_routes(inst: Instance, routes_r: dict[str, list[str]], routes_o: dict[str, list[str]],
                    ncg: NodeCellGraph) -> Timeline:
    """Replay crew itineraries; operating crews wait for the adjacent cells to clear."""
    tl = Timeline()
    speed = inst.crews.speed_kmh
    for crew in inst.crews.repair:
        now, here = 0.0, crew.depot
        stops = []
        for fault in routes_r.get(crew.id, []):
            site = inst.task_site(fault)
            arrive = now + travel_minutes(here, site, speed)
            done = arrive + inst.repair_minutes(fault, crew)
            tl.repair_arrive[fault], tl.repair_done[fault], tl.repair_crew[fault] = arrive, done, crew.id
            stops.append({"task": fault, "arrive": arrive, "leave": done})
            now, here = done, site
        tl.itineraries[crew.id] = stops
    for cell in ncg.cells:
        tl.cell_clear[cell.id] = max([tl.repair_done.get(f, math.inf) for f in cell.faults],
                                     default=CELL_CLEAR_EMPTY)
    for e in ncg.edges:
        tl.switch_clear[e.switch] = max(tl.cell_clear[e.a], tl.cell_clear[e.b])
    for crew in inst.crews.operating:
        now, here = 0.0, crew.depot
        stops = []
        for sw in routes_o.get(crew.id, []):
            site = inst.task_site(sw)
            arrive = now + travel_minutes(here, site, speed)
            start = max(arrive, tl.switch_clear.get(sw, CELL_CLEAR_EMPTY))
            done = start + inst.manual_minutes(sw, crew)
            tl.manual_arrive[sw], tl.manual_start[sw], tl.manual_done[sw] = arrive, start, done
            tl.manual_crew[sw] = crew.id
            stops.append({"task": sw, "arrive": arrive, "start": start, "leave": done})
            now, here = done, site
        tl.itineraries[crew.id] = stops
    return tl


class _Forest:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _warn_sourceless(inst: Instance, ncg: NodeCellGraph, components: dict, operation: dict) -> None:
    """Log islands that serve load without any source inside them."""
    fed = {ncg.cell_of_node[s.node] for s in inst.network.sources}
    for t, comp in components.items():
        has_source = {comp[c] for c in fed}
        for n in inst.network.nodes:
            served = n.load[t - 1] - operation["shed"][n.id, t]
            if served > 1e-6 and comp[ncg.cell_of_node[n.id]] not in has_source:
                logger.warning("slot %d: node %s is served inside an island without a source", t, n.id)


def validate_schedule(inst: Instance, x: FirstStageDecision, scenario: Scenario | None = None,
                      final_merge: bool = True) -> ValidationResult:
    """Check a first-stage schedule and price it under ``scenario`` (forecast by default)."""
    ncg = reduce_network(inst.network)
    net = inst.network
    slots = list(inst.slots)
    out: list[Violation] = []

    def flag(family, kind, entity, slot, message):
        out.append(Violation(family, kind, entity, slot, message))

    scenario = scenario or Scenario.zero(inst.uncertainty, inst.horizon.slots)
    try:
        check_scenario(inst.uncertainty, scenario)
        available = materialize_uncertainty(inst.uncertainty, scenario)
    except InvalidScenarioError as exc:
        flag("III", "budget", "scenario", None, str(exc))
        available = materialize_uncertainty(inst.uncertainty, Scenario.zero(inst.uncertainty, len(slots)))

    # routes and coverage
    routes_r: dict[str, list[str]] = {}
    routes_o: dict[str, list[str]] = {}
    for kind, crews, routes in (("xr", inst.crews.repair, routes_r), ("xo", inst.crews.operating, routes_o)):
        for crew in crews:
            try:
                routes[crew.id] = x.route(kind, crew.id)
            except ValueError as exc:
                flag("I", "routing", crew.id, None, str(exc))
                routes[crew.id] = []
                continue
            arcs = [a for a in x.arcs(kind, crew.id) if a != (DEPOT, DEPOT)]
            if len(arcs) != len(routes[crew.id]) + (1 if routes[crew.id] else 0):
                flag("I", "routing", crew.id, None, "selected arcs outside the depot tour (subtour)")
    visits: dict[str, int] = {}
    for route in routes_r.values():
        for task in route:
            visits[task] = visits.get(task, 0) + 1
    for fault in net.faults:
        if visits.get(fault, 0) != 1:
            flag("I", "coverage", fault, None, f"fault visited {visits.get(fault, 0)} times, expected once")
    for task in visits:
        if task not in net.faults:
            flag("I", "coverage", task, None, "repair crew visits a task that is not a fault")
    op_visits: dict[str, int] = {}
    for route in routes_o.values():
        for task in route:
            op_visits[task] = op_visits.get(task, 0) + 1
    for task, k in op_visits.items():
        if k > 1:
            flag("I", "coverage", task, None, f"switch operated {k} times")
        if task not in inst.operating_tasks:
            flag("I", "coverage", task, None, "operating crew visits an unknown switch")

    tl = simulate_routes(inst, routes_r, routes_o, ncg)

    # repair and cell status
    for fault in net.faults:
        for t in slots:
            want = int(slot_reached(inst, tl.repair_done.get(fault, math.inf), t))
            if x.flag(("uL", fault, t)) != want:
                flag("I", "repair_status", fault, t, f"status {x.flag(('uL', fault, t))}, "
                     f"repair completes at {tl.repair_done.get(fault, math.inf):.4g} min")
    for cell in ncg.cells:
        for t in slots:
            if x.flag(("uNC", cell.id, t)) > int(slot_reached(inst, tl.cell_clear[cell.id], t)):
                flag("I", "cell_status", cell.id, t, f"energized before clearing at {tl.cell_clear[cell.id]:.4g} min")

    # manual closing
    for e in ncg.edges:
        line = e.line
        prev = 0
        for t in slots:
            wm = x.flag(("wMS", line, t))
            if wm < prev:
                flag("I", "manual_close", line, t, "manually closed switch reopens")
            prev = wm
            if wm and not slot_reached(inst, tl.manual_done.get(e.switch, math.inf), t):
                done = tl.manual_done.get(e.switch, math.inf)
                flag("I", "manual_close", line, t, f"closed before its manual operation ends ({done:.4g} min)")

    # cyber
    cyber = inst.cyber
    links = {}
    if cyber.routers:
        links = derive_cyber_links(cyber)
        centre = cyber.centre.id
        for r in cyber.routers:
            for t in slots:
                uc = x.flag(("uC", r.id, t))
                if r.id == centre:
                    if uc != 1:
                        flag("I", "cyber", r.id, t, "control centre must stay available")
                    continue
                ups = ups_alive(r.ups_minutes, t, inst.horizon.slot_minutes)
                if ("uUPS", r.id, t) in x.values and x.flag(("uUPS", r.id, t)) != ups:
                    flag("II", "ups", r.id, t, f"UPS status should be {ups}")
                powered = x.flag(("e", r.id, t))
                if powered < ups:
                    flag("II", "router_power", r.id, t, "UPS alive but router marked unpowered")
                if powered and not ups and not x.flag(("uNC", ncg.cell_of_node[r.node], t)):
                    flag("II", "router_power", r.id, t, "powered without UPS in an uncleared cell")
                if uc and not powered:
                    flag("II", "router_power", r.id, t, "available without power")
                if uc and t <= cyber.blackout_slots:
                    flag("I", "cyber", r.id, t, "available during the cyber blackout")
                if r.role in LINKED_ROLES:
                    up_links = [k for k in range(len(links.get(r.id, ()))) if x.flag(("link", r.id, k, t))]
                    if uc and not up_links:
                        flag("I", "cyber", r.id, t, "available without any working link")
                    for k in up_links:
                        down = [c for c in links[r.id][k] if not x.flag(("uC", c, t))]
                        if down:
                            flag("I", "cyber", r.id, t, f"link {k} used while {down[0]} is down")

    # remote closing
    for e in ncg.edges:
        line = e.line
        sw = net.switch_line(e.switch).switch
        controller = cyber.controller_of(e.switch) if cyber.routers else None
        remote_ready = tl.switch_clear[e.switch] + sw.remote_minutes
        prev = 0
        for t in slots:
            wr = x.flag(("wRCS", line, t))
            if wr and (e.kind != "RCS" or controller is None):
                flag("II", "remote_close", line, t, "remote closing of a switch without a remote controller")
            elif wr and not prev:
                if not x.flag(("uC", controller.id, t)):
                    flag("II", "remote_close", line, t, f"controller {controller.id} unavailable when closing")
                if not slot_reached(inst, remote_ready, t):
                    flag("II", "remote_close", line, t,
                         f"closed before the remote window opens at {remote_ready:.4g} min")
            if wr < prev:
                flag("II", "remote_close", line, t, "remotely closed switch reopens")
            prev = wr

    # line status and radiality
    closed: dict[tuple[str, int], int] = {}
    for e in ncg.edges:
        for t in slots:
            w = x.flag(("w", e.line, t))
            merged = max(x.flag(("wMS", e.line, t)), x.flag(("wRCS", e.line, t)))
            if w != merged:
                flag("II", "switch_status", e.line, t, f"line status {w} but manual/remote closing gives {merged}")
            closed[e.line, t] = w
    components: dict[int, dict[str, str]] = {}
    for t in slots:
        forest = _Forest([c.id for c in ncg.cells])
        n_closed = 0
        for e in ncg.edges:
            if closed[e.line, t]:
                n_closed += 1
                if not forest.union(e.a, e.b):
                    flag("II", "radiality", e.line, t, "closing this line creates a loop")
        roots = {forest.find(c.id) for c in ncg.cells}
        if any(("xi", c.id, t) in x.values for c in ncg.cells):
            per_component: dict[str, int] = {}
            for c in ncg.cells:
                per_component[forest.find(c.id)] = per_component.get(forest.find(c.id), 0) + x.flag(("xi", c.id, t))
            for comp, k in sorted(per_component.items()):
                if k != 1:
                    flag("II", "radiality", comp, t, f"component has {k} root flags")
        if len(ncg.cells) != n_closed + len(roots):
            flag("II", "radiality", "network", t, "cell count differs from closed edges plus components")
        if final_merge and t == slots[-1] and len(roots) != 1:
            flag("II", "radiality", "network", t, f"{len(roots)} islands remain at the final slot")
        components[t] = {c.id: forest.find(c.id) for c in ncg.cells}

    def status(kind: str, key: str, t: int) -> float:
        if kind == "uNC":
            return x.flag(("uNC", key, t))
        if kind == "w":
            return closed[key, t]
        if kind == "e":
            return x.flag(("e", key, t))
        return float(ups_alive(cyber.router(key).ups_minutes, t, inst.horizon.slot_minutes))

    cost, operation = operating_cost(inst, ncg.cell_of_node, status, available)
    if cost is None:
        flag("II", "recourse", "operation", None, "no feasible operation for this schedule and scenario")
        cost = math.inf
    else:
        _warn_sourceless(inst, ncg, components, operation)
    return ValidationResult(not out, cost, out, tl, operation)

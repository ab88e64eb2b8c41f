"""Repair- and operating-crew routing, timing and status-timeline constraints."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .builder import ModelBuilder
from .instance import Crew, Instance
from .network import NodeCellGraph, travel_minutes

DEPOT = "@depot"


@dataclass(frozen=True)
class Clusters:
    """Tasks each crew may serve."""

    repair: dict[str, tuple[str, ...]]
    operating: dict[str, tuple[str, ...]]

    def repair_crews_for(self, fault: str) -> list[str]:
        return [c for c, tasks in self.repair.items() if fault in tasks]

    def operating_crews_for(self, switch: str) -> list[str]:
        return [c for c, tasks in self.operating.items() if switch in tasks]


def _balanced_greedy(tasks: list[str], crews: tuple[Crew, ...], inst: Instance) -> dict[str, tuple[str, ...]]:
    if not crews:
        return {}
    n, k = len(tasks), len(crews)
    low = n // k
    high_slots = n - k * low  # crews allowed to take one more than `low`
    pairs = sorted((math.dist(c.depot, inst.task_site(t)), t, c.id) for t in tasks for c in crews)
    taken: dict[str, list[str]] = {c.id: [] for c in crews}
    done: set[str] = set()
    for _, task, crew in pairs:
        if task in done:
            continue
        size = len(taken[crew])
        if size < low or (size == low and high_slots > 0):
            if size == low:
                high_slots -= 1
            taken[crew].append(task)
            done.add(task)
    return {c: tuple(sorted(ts, key=tasks.index)) for c, ts in taken.items()}


def cluster_tasks(inst: Instance) -> Clusters:
    """Split faults among repair crews and switches among operating crews.

    Greedy by ascending depot distance, ties broken by task id, with sizes
    capped so that no two crews differ by more than one task.
    """
    faults = list(inst.network.faults)
    switches = list(inst.operating_tasks)
    return Clusters(_balanced_greedy(faults, inst.crews.repair, inst),
                    _balanced_greedy(switches, inst.crews.operating, inst))


def all_tasks(inst: Instance) -> Clusters:
    """No clustering: every crew may serve every task of its kind."""
    return Clusters({c.id: inst.network.faults for c in inst.crews.repair},
                    {c.id: inst.operating_tasks for c in inst.crews.operating})


# --------------------------------------------------------------------------


def _travel(inst: Instance, crew: Crew, a: str, b: str) -> float:
    pa = crew.depot if a == DEPOT else inst.task_site(a)
    pb = crew.depot if b == DEPOT else inst.task_site(b)
    return travel_minutes(pa, pb, inst.crews.speed_kmh)


def _arcs(tasks: tuple[str, ...], stay: bool) -> list[tuple[str, str]]:
    nodes = (DEPOT,) + tasks
    arcs = [(a, b) for a in nodes for b in nodes if a != b]
    if stay:
        arcs.append((DEPOT, DEPOT))
    return arcs


def incoming(kind: str, crew: str, task: str, tasks: tuple[str, ...]) -> dict[tuple, float]:
    """Sum of arcs entering ``task`` for one crew, including the depot arc."""
    return {(kind, crew, a, task): 1.0 for a in (DEPOT,) + tasks if a != task}


def emit_crew_routing(b: ModelBuilder, inst: Instance, clusters: Clusters) -> None:
    for kind, crews, table in (("xr", inst.crews.repair, clusters.repair),
                               ("xo", inst.crews.operating, clusters.operating)):
        for crew in crews:
            tasks = table[crew.id]
            # operating crews may stay home; repair crews only when they have nothing to do
            stay = kind == "xo" or not tasks
            for a, c in _arcs(tasks, stay):
                b.binary((kind, crew.id, a, c))
            out_depot = {(kind, crew.id, DEPOT, c): 1.0 for c in tasks}
            in_depot = {(kind, crew.id, c, DEPOT): 1.0 for c in tasks}
            if stay:
                out_depot[(kind, crew.id, DEPOT, DEPOT)] = 1.0
                in_depot[(kind, crew.id, DEPOT, DEPOT)] = 1.0
            b.add(out_depot, "==", 1, "I", "depart")
            b.add(in_depot, "==", 1, "I", "return")
            for m in tasks:
                flow = incoming(kind, crew.id, m, tasks)
                for c in (DEPOT,) + tasks:
                    if c != m:
                        flow[(kind, crew.id, m, c)] = flow.get((kind, crew.id, m, c), 0.0) - 1.0
                b.add(flow, "==", 0, "I", "continuity")
            for i, m in enumerate(tasks):
                for n in tasks[i + 1:]:
                    b.add({(kind, crew.id, m, n): 1, (kind, crew.id, n, m): 1}, "<=", 1, "I", "two_cycle")

    for n in inst.network.faults:
        terms: dict = {}
        for rc in clusters.repair_crews_for(n):
            terms.update(incoming("xr", rc, n, clusters.repair[rc]))
        b.add(terms, "==", 1, "I", "fault_cover")
    for q in inst.operating_tasks:
        terms = {}
        for oc in clusters.operating_crews_for(q):
            terms.update(incoming("xo", oc, q, clusters.operating[oc]))
        if terms:
            b.add(terms, "<=", 1, "I", "switch_cover")


def emit_arrival_times(b: ModelBuilder, inst: Instance, clusters: Clusters) -> None:
    hz = inst.horizon
    big, cap = hz.big_m["routing"], hz.time_cap
    for kind, at, crews, table in (("xr", "AT_r", inst.crews.repair, clusters.repair),
                                   ("xo", "AT_o", inst.crews.operating, clusters.operating)):
        for crew in crews:
            tasks = table[crew.id]
            for n in tasks:
                b.add_var((at, n, crew.id), lb=0, ub=cap)
            if kind == "xo":
                for p in tasks:
                    b.add_var(("TS", p, crew.id), lb=0, ub=cap)
            for n in tasks:
                a_n = (at, n, crew.id)
                inc = incoming(kind, crew.id, n, tasks)
                # not visited: arrival pinned at T_MAX
                b.add({a_n: 1, **{k: big for k in inc}}, ">=", hz.big_time, "I", "arrive_unassigned")
                b.add({a_n: 1, **{k: -big for k in inc}}, "<=", hz.big_time, "I", "arrive_unassigned")
                direct = (kind, crew.id, DEPOT, n)
                t0 = _travel(inst, crew, DEPOT, n)
                b.add({a_n: 1, direct: -big}, ">=", t0 - big, "I", "arrive_direct")
                b.add({a_n: 1, direct: big}, "<=", t0 + big, "I", "arrive_direct")
                for m in tasks:
                    if m == n:
                        continue
                    arc = (kind, crew.id, m, n)
                    if kind == "xr":
                        prev = {(at, m, crew.id): 1.0}
                        lag = _travel(inst, crew, m, n) + inst.repair_minutes(m, crew)
                    else:
                        prev = {("TS", m, crew.id): 1.0}
                        lag = _travel(inst, crew, m, n) + inst.manual_minutes(m, crew)
                    lo = {a_n: 1.0, arc: -big, **{k: -v for k, v in prev.items()}}
                    hi = {a_n: 1.0, arc: big, **{k: -v for k, v in prev.items()}}
                    b.add(lo, ">=", lag - big, "I", "arrive_chain")
                    b.add(hi, "<=", lag + big, "I", "arrive_chain")


def emit_completion_times(b: ModelBuilder, inst: Instance, clusters: Clusters, ncg: NodeCellGraph) -> None:
    hz = inst.horizon
    cap, tmax = hz.time_cap, hz.big_time
    net = inst.network
    crews_r = {c.id: c for c in inst.crews.repair}
    crews_o = {c.id: c for c in inst.crews.operating}

    for n in net.faults:
        b.add_var(("tE_r", n), lb=0, ub=cap)
        owners = clusters.repair_crews_for(n)
        for rc in owners:
            b.binary(("beta_r", n, rc))
        b.add({("beta_r", n, rc): 1 for rc in owners}, "==", 1, "I", "selector")
        for rc in owners:
            tasks = clusters.repair[rc]
            tau = ("tau_r", n, rc)
            b.add_var(tau, lb=0, ub=cap)
            inc = incoming("xr", rc, n, tasks)
            rp = inst.repair_minutes(n, crews_r[rc])
            b.add({tau: 1, ("AT_r", n, rc): -1, **{k: -rp for k in inc}}, "==", 0, "I", "repair_end")
            b.add({("tE_r", n): 1, tau: -1}, "<=", 0, "I", "repair_end")
            b.add({("tE_r", n): 1, tau: -1, ("beta_r", n, rc): -tmax}, ">=", -tmax, "I", "repair_end")
            # the selector follows the crew that actually visits
            b.add({("beta_r", n, rc): 1, **{k: -1 for k in inc}}, "==", 0, "I", "selector")

    for cell in ncg.cells:
        b.add_var(("Tcell", cell.id), lb=0, ub=cap)
        for n in cell.faults:
            b.add({("Tcell", cell.id): 1, ("tE_r", n): -1}, ">=", 0, "I", "cell_clear")

    for q in inst.operating_tasks:
        b.add_var(("Tms", q), lb=0, ub=cap)
        for nc in ncg.adjacent_cells(q):
            b.add({("Tms", q): 1, ("Tcell", nc): -1}, ">=", 0, "I", "switch_clear")
        owners = clusters.operating_crews_for(q)
        if not owners:
            continue
        b.add_var(("tE_o", q), lb=0, ub=cap)
        for oc in owners:
            b.binary(("beta_o", q, oc))
        b.add({("beta_o", q, oc): 1 for oc in owners}, "==", 1, "I", "selector")
        for oc in owners:
            tasks = clusters.operating[oc]
            ts = ("TS", q, oc)
            b.add({ts: 1, ("AT_o", q, oc): -1}, ">=", 0, "I", "safe_start")
            b.add({ts: 1, ("Tms", q): -1}, ">=", 0, "I", "safe_start")
            tau = ("tau_o", q, oc)
            b.add_var(tau, lb=0, ub=cap)
            inc = incoming("xo", oc, q, tasks)
            mso = inst.manual_minutes(q, crews_o[oc])
            b.add({tau: 1, ts: -1, **{k: -mso for k in inc}}, "==", 0, "I", "operate_end")
            b.add({("tE_o", q): 1, tau: -1}, "<=", 0, "I", "operate_end")
            b.add({("tE_o", q): 1, tau: -1, ("beta_o", q, oc): -tmax}, ">=", -tmax, "I", "operate_end")
            b.add({("beta_o", q, oc): 1, **{k: -1 for k in inc}}, ">=", 0, "I", "selector")


def emit_status_timelines(b: ModelBuilder, inst: Instance, clusters: Clusters, ncg: NodeCellGraph) -> None:
    hz = inst.horizon
    big, eps = hz.big_m["status"], hz.epsilon
    for n in inst.network.faults:
        for t in inst.slots:
            u = ("uL", n, t)
            b.binary(u)
            start = hz.slot_start(t)
            # start - tE <= M u - eps <= M + start - tE
            b.add({u: big, ("tE_r", n): 1}, ">=", start + eps, "I", "repaired")
            b.add({u: big, ("tE_r", n): 1}, "<=", big + start + eps, "I", "repaired")
    for cell in ncg.cells:
        for t in inst.slots:
            b.binary(("uNC", cell.id, t))
            for n in cell.faults:
                b.add({("uNC", cell.id, t): 1, ("uL", n, t): -1}, "<=", 0, "I", "cell_status")
    for edge in ncg.edges:
        q = edge.switch
        manual = bool(clusters.operating_crews_for(q))
        for t in inst.slots:
            w = ("wMS", edge.line, t)
            b.binary(w)
            if not manual:
                b.fix(w, 0)
                continue
            start = hz.slot_start(t)
            b.add({w: big, ("tE_o", q): 1}, ">=", start + eps, "I", "closed_manually")
            b.add({w: big, ("tE_o", q): 1}, "<=", big + start + eps, "I", "closed_manually")


def emit_crew_dispatch(b: ModelBuilder, inst: Instance, clusters: Clusters, ncg: NodeCellGraph) -> None:
    emit_crew_routing(b, inst, clusters)
    emit_arrival_times(b, inst, clusters)
    emit_completion_times(b, inst, clusters, ncg)
    emit_status_timelines(b, inst, clusters, ncg)

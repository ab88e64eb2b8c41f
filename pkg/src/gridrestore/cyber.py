"""D2D cyber network: link derivation, router availability and remote switching."""
from __future__ import annotations

import logging
import math

import networkx as nx

from .builder import ModelBuilder
from .instance import CyberNetwork, Instance
from .network import NodeCellGraph

logger = logging.getLogger(__name__)

# router roles whose availability needs a working link to the control centre
LINKED_ROLES = ("rcs-ftu", "gt", "relay")


class CyberError(ValueError):
    pass


def derive_cyber_links(cyber: CyberNetwork) -> dict[str, tuple[tuple[str, ...], ...]]:
    """Simple router paths to the control centre, at most ``hop_limit`` hops each.

    Routers within ``radius`` meters of each other are adjacent. Paths are ordered by
    hop count, then total length, then router ids. Explicit ``cyber.links`` win.
    """
    if cyber.links is not None:
        return {r.id: tuple(cyber.links.get(r.id, ())) for r in cyber.routers if r.role != "control-centre"}
    centres = [r for r in cyber.routers if r.role == "control-centre"]
    if not centres:
        if cyber.routers:
            raise CyberError("cyber network has no control-centre router")
        return {}
    centre = centres[0].id
    pos = {r.id: (r.x, r.y) for r in cyber.routers}
    g = nx.Graph()
    g.add_nodes_from(pos)
    ids = [r.id for r in cyber.routers]
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if math.dist(pos[a], pos[b]) <= cyber.radius:
                g.add_edge(a, b)

    def length(path) -> float:
        return sum(math.dist(pos[u], pos[v]) for u, v in zip(path, path[1:]))

    out = {}
    for r in cyber.routers:
        if r.id == centre:
            continue
        paths = [tuple(p) for p in nx.all_simple_paths(g, r.id, centre, cutoff=cyber.hop_limit)]
        paths.sort(key=lambda p: (len(p), length(p), p))
        if not paths:
            logger.warning("router %s has no path to the control centre; it stays unavailable", r.id)
        out[r.id] = tuple(paths)
    return out


def ups_alive(ups_minutes: float, t: int, slot_minutes: float) -> int:
    return int(t * slot_minutes <= ups_minutes)


def emit_cyber_availability(b: ModelBuilder, inst: Instance, links: dict) -> None:
    cyber = inst.cyber
    if not cyber.routers:
        return
    centre = cyber.centre.id
    for r in cyber.routers:
        for t in inst.slots:
            b.binary(("uC", r.id, t))
            if r.id == centre:
                b.fix(("uC", r.id, t), 1)
            elif t <= cyber.blackout_slots:
                b.fix(("uC", r.id, t), 0)
    for r in cyber.routers:
        if r.role not in LINKED_ROLES:
            continue
        paths = links.get(r.id, ())
        for t in inst.slots:
            if not paths:
                b.fix(("uC", r.id, t), 0)
                continue
            for k, path in enumerate(paths):
                lk = ("link", r.id, k, t)
                b.binary(lk)
                # all members up, the router itself and the centre included
                members = {("uC", c, t): -1.0 / len(path) for c in path}
                b.add({lk: 1, **members}, "<=", 0, "I", "link_up")
            big = inst.horizon.big_m["link"]
            b.add({("uC", r.id, t): 1, **{("link", r.id, k, t): -big for k in range(len(paths))}},
                  "<=", 0, "I", "router_linked")


def emit_cyber_power_dependency(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph) -> None:
    """Router powered from its node or its UPS.

    ``e`` marks a router with power; availability ``uC`` needs it. Keeping the two
    apart lets a powered router without a link simply stay unavailable.
    """
    cyber = inst.cyber
    hz = inst.horizon
    big = hz.big_m["power_dependency"]
    for r in cyber.routers:
        if r.role == "control-centre":
            continue
        node = inst.network.node(r.node)
        for t in inst.slots:
            ups, e = ("uUPS", r.id, t), ("e", r.id, t)
            b.binary(ups)
            b.fix(ups, ups_alive(r.ups_minutes, t, hz.slot_minutes))
            slack = r.ups_minutes - t * hz.slot_minutes + hz.epsilon
            b.add({ups: big}, ">=", slack, "II", "ups")
            b.add({ups: big}, "<=", big + slack, "II", "ups")
            b.binary(e)
            served = node.load[t - 1] - r.power_kw
            shed = ("shed", r.node, t)
            # powered whenever the node carries more than the router draw
            b.add({e: big, shed: 1}, ">=", served, "II", "router_power")
            # powered only if the node carries the router draw, or the UPS is alive
            b.add({e: r.power_kw, shed: 1, ups: -r.power_kw}, "<=", node.load[t - 1], "II", "router_power")
            b.add({e: 1, ups: -1}, ">=", 0, "I", "router_power")
            # implied by the two rows above: a node in an uncleared cell carries nothing
            b.add({e: 1, ups: -1, ("uNC", ncg.cell_of_node[r.node], t): -1}, "<=", 0, "I", "router_power")
            b.add({("uC", r.id, t): 1, e: -1}, "<=", 0, "I", "router_power")


def emit_remote_switching(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph) -> None:
    hz = inst.horizon
    big = hz.big_m["status"]
    for edge in ncg.edges:
        sw = inst.network.switch_line(edge.switch).switch
        controller = inst.cyber.controller_of(edge.switch) if inst.cyber.routers else None
        remote = edge.kind == "RCS" and controller is not None
        if remote:
            trcs = ("Trcs", edge.switch)
            b.add_var(trcs, lb=0, ub=hz.time_cap)
            for nc in (edge.a, edge.b):
                b.add({trcs: 1, ("Tcell", nc): -1}, ">=", 0, "I", "remote_clear")
        for t in inst.slots:
            wr = ("wRCS", edge.line, t)
            b.binary(wr)
            if not remote:
                b.fix(wr, 0)
            else:
                prev = {("wRCS", edge.line, t - 1): -1} if t > 1 else {}
                b.add({wr: 1, **prev}, ">=", 0, "I", "remote_monotone")
                b.add({wr: 1, **prev, ("uC", controller.id, t): -1}, "<=", 0, "II", "remote_gate")
                b.add({wr: big, ("Trcs", edge.switch): 1}, "<=", big + hz.slot_start(t) - sw.remote_minutes,
                      "II", "remote_gate")
            w, wm = ("w", edge.line, t), ("wMS", edge.line, t)
            b.add({wm: 1, wr: 1, w: -2}, "<=", 0, "II", "switch_merge")
            b.add({w: 1, wm: -1, wr: -1}, "<=", 0, "II", "switch_merge")


def emit_cyber(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph) -> dict:
    links = derive_cyber_links(inst.cyber)
    emit_cyber_availability(b, inst, links)
    emit_cyber_power_dependency(b, inst, ncg)
    emit_remote_switching(b, inst, ncg)
    return links

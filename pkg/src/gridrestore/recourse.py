"""Stand-alone operating-cost model used to check schedules.

Written apart from the engine's emitters on purpose: the validator and the
brute-force oracle price schedules with this code, so a slip in one formulation
shows up as a disagreement instead of being copied into both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp


@dataclass(frozen=True)
class Col:
    """Reference to a decision column inside a :class:`LinearSystem`."""

    j: int


Param = Union[float, int, Col]


@dataclass
class LinearSystem:
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    integer: list[int] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    vals: list[float] = field(default_factory=list)
    row_lo: list[float] = field(default_factory=list)
    row_hi: list[float] = field(default_factory=list)

    def column(self, lb: float = 0.0, ub: float = math.inf, integer: bool = False, cost: float = 0.0) -> int:
        self.lb.append(lb)
        self.ub.append(ub)
        self.integer.append(int(integer))
        self.cost.append(cost)
        return len(self.lb) - 1

    def binary(self) -> Col:
        return Col(self.column(0.0, 1.0, True))

    def constrain(self, terms: list[tuple[float, Param]], lo: float = -math.inf, hi: float = math.inf) -> None:
        """lo <= sum(coef * param) <= hi, numeric params folded into the bounds."""
        r = len(self.row_lo)
        const = 0.0
        for coef, p in terms:
            if isinstance(p, Col):
                self.rows.append(r)
                self.cols.append(p.j)
                self.vals.append(coef)
            else:
                const += coef * float(p)
        self.row_lo.append(lo - const)
        self.row_hi.append(hi - const)

    def solve(self, gap: float = 1e-9):
        n = len(self.lb)
        A = sp.csr_array((self.vals, (self.rows, self.cols)), shape=(len(self.row_lo), n))
        cons = [LinearConstraint(A, self.row_lo, self.row_hi)] if self.row_lo else []
        return milp(np.array(self.cost), constraints=cons, bounds=Bounds(self.lb, self.ub),
                    integrality=np.array(self.integer), options={"mip_rel_gap": gap})


# status(kind, key, t) gives "uNC" per cell, "w" per switchable line, "e"/"ups" per router
Status = Callable[[str, str, int], Param]


def add_operation(sys_: LinearSystem, inst, cell_of_node: dict[str, str], status: Status,
                  available: dict[str, tuple[float, ...]], cost_scale: float = 1.0) -> dict:
    """Add one copy of the per-slot operation (all slots) and return its columns.

    ``available`` is the RES output limit per source and slot. Shedding cost is
    put on the objective scaled by ``cost_scale``.
    """
    net = inst.network
    hz = inst.horizon
    hours = hz.slot_minutes / 60.0
    v0 = net.nominal_voltage
    T = hz.slots
    shed, pg, qg, pl, ql, volt = {}, {}, {}, {}, {}, {}
    for t in range(1, T + 1):
        for n in net.nodes:
            shed[n.id, t] = sys_.column(0.0, n.load[t - 1], cost=cost_scale * n.penalty * hours)
            volt[n.id, t] = sys_.column(n.v_min, n.v_max)
        for s in net.sources:
            pg[s.id, t] = sys_.column(0.0, math.inf)
            qg[s.id, t] = sys_.column(-math.inf, math.inf)
        for ln in net.lines:
            if ln.switch is None:
                pl[ln.id, t] = sys_.column(-ln.p_max, ln.p_max)
                ql[ln.id, t] = sys_.column(-ln.q_max, ln.q_max)
            else:
                pl[ln.id, t] = sys_.column(-math.inf, math.inf)
                ql[ln.id, t] = sys_.column(-math.inf, math.inf)

    for t in range(1, T + 1):
        for n in net.nodes:
            energized = status("uNC", cell_of_node[n.id], t)
            load = n.load[t - 1]
            # an uncleared cell sheds its whole load
            sys_.constrain([(1.0, Col(shed[n.id, t])), (load, energized)], lo=load)
            k = math.tan(math.acos(n.power_factor))
            p_terms = [(1.0, Col(shed[n.id, t]))]
            q_terms = [(k, Col(shed[n.id, t]))]
            for s in net.sources:
                if s.node == n.id:
                    p_terms.append((1.0, Col(pg[s.id, t])))
                    q_terms.append((1.0, Col(qg[s.id, t])))
            for ln in net.lines:
                sign = 1.0 if ln.to_node == n.id else -1.0 if ln.from_node == n.id else 0.0
                if sign:
                    p_terms.append((sign, Col(pl[ln.id, t])))
                    q_terms.append((sign, Col(ql[ln.id, t])))
            sys_.constrain(p_terms, lo=load, hi=load)
            sys_.constrain(q_terms, lo=k * load, hi=k * load)

        for s in net.sources:
            on = status("uNC", cell_of_node[s.node], t)
            qcap = s.q_max[t - 1]
            sys_.constrain([(1.0, Col(qg[s.id, t])), (-qcap, on)], hi=0.0)
            sys_.constrain([(1.0, Col(qg[s.id, t])), (qcap, on)], lo=0.0)
            pcap = available[s.id][t - 1] if s.kind == "res" else s.p_max[t - 1]
            sys_.constrain([(1.0, Col(pg[s.id, t])), (-pcap, on)], hi=0.0)
            if s.kind == "gt":
                step = [(1.0 / s.reserve_factor, Col(pg[s.id, t]))]
                if t > 1:
                    step.append((-1.0 / s.reserve_factor, Col(pg[s.id, t - 1])))
                sys_.constrain(step, lo=-s.ramp_down if math.isfinite(s.ramp_down) else -math.inf,
                               hi=s.ramp_up if math.isfinite(s.ramp_up) else math.inf)

        for ln in net.lines:
            drop = [(1.0, Col(volt[ln.from_node, t])), (-1.0, Col(volt[ln.to_node, t])),
                    (-ln.r * 1e3 / v0, Col(pl[ln.id, t])), (-ln.x * 1e3 / v0, Col(ql[ln.id, t]))]
            if ln.switch is None:
                sys_.constrain(drop, lo=0.0, hi=0.0)
                continue
            closed = status("w", ln.id, t)
            if isinstance(closed, Col):
                big = (max(n.v_max for n in net.nodes) - min(n.v_min for n in net.nodes)
                       + (ln.r * ln.p_max + ln.x * ln.q_max) * 1e3 / v0)
                sys_.constrain(drop + [(big, closed)], hi=big)
                sys_.constrain(drop + [(-big, closed)], lo=-big)
            elif closed >= 0.5:
                sys_.constrain(drop, lo=0.0, hi=0.0)
            for var, cap in ((pl[ln.id, t], ln.p_max), (ql[ln.id, t], ln.q_max)):
                sys_.constrain([(1.0, Col(var)), (-cap, closed)], hi=0.0)
                sys_.constrain([(1.0, Col(var)), (cap, closed)], lo=0.0)

        # load pickup limited by the frequency response of energized DERs
        pickup = [(-1.0, Col(shed[n.id, t])) for n in net.nodes]
        limit = -sum(n.load[t - 1] for n in net.nodes)
        if t > 1:
            pickup += [(1.0, Col(shed[n.id, t - 1])) for n in net.nodes]
            limit += sum(n.load[t - 2] for n in net.nodes)
        for s in net.sources:
            if s.kind in ("gt", "res") and s.frr > 0:
                pickup.append((-s.frr * max(s.p_max), status("uNC", cell_of_node[s.node], t)))
        sys_.constrain(pickup, hi=limit)

        for r in inst.cyber.routers:
            if r.role == "control-centre":
                continue
            node = net.node(r.node)
            load = node.load[t - 1]
            e, ups = status("e", r.id, t), status("ups", r.id, t)
            big = max(10.0 * inst.total_load(), 1.0)
            # served load above the router draw means the router has power
            sys_.constrain([(big, e), (1.0, Col(shed[r.node, t]))], lo=load - r.power_kw)
            # a powered router needs its draw served, unless the UPS carries it
            sys_.constrain([(r.power_kw, e), (1.0, Col(shed[r.node, t])), (-r.power_kw, ups)], hi=load)
    return {"shed": shed, "pg": pg, "qg": qg, "pl": pl, "ql": ql, "v": volt}


def operating_cost(inst, cell_of_node: dict[str, str], status: Status,
                   available: dict[str, tuple[float, ...]]) -> tuple[float | None, dict | None]:
    """Minimal shedding cost with every status fixed; ``None`` if no operation is feasible."""
    sys_ = LinearSystem()
    cols = add_operation(sys_, inst, cell_of_node, status, available)
    res = sys_.solve()
    if res.status != 0:
        return None, None
    values = {k: {key: float(res.x[j]) for key, j in table.items()} for k, table in cols.items()}
    return float(res.fun), values

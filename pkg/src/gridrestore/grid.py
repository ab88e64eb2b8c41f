"""Physical operation constraints and the budgeted RES uncertainty set."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .builder import ModelBuilder
from .instance import Instance, UncertaintySpec
from .network import NodeCellGraph


class InvalidScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Upward/downward RES deviations, each in [0, 1], per source and slot."""

    up: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    down: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    @classmethod
    def zero(cls, spec: UncertaintySpec, slots: int) -> "Scenario":
        return cls({u.source: (0.0,) * slots for u in spec.res}, {u.source: (0.0,) * slots for u in spec.res})

    def deviation(self, source: str, t: int) -> float:
        """Net deviation sigma+ - sigma- at 1-based slot ``t``."""
        up = self.up.get(source)
        down = self.down.get(source)
        return (up[t - 1] if up else 0.0) - (down[t - 1] if down else 0.0)

    def used_budget(self, source: str) -> float:
        return sum(self.up.get(source, ())) + sum(self.down.get(source, ()))

    def as_vector(self, spec: UncertaintySpec) -> list[float]:
        out: list[float] = []
        for u in spec.res:
            n = len(u.forecast)
            out.extend(self.up.get(u.source, (0.0,) * n))
            out.extend(self.down.get(u.source, (0.0,) * n))
        return out

    def to_dict(self) -> dict:
        return {"up": {k: list(v) for k, v in sorted(self.up.items())},
                "down": {k: list(v) for k, v in sorted(self.down.items())}}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Scenario":
        return cls({k: tuple(float(x) for x in v) for k, v in doc.get("up", {}).items()},
                   {k: tuple(float(x) for x in v) for k, v in doc.get("down", {}).items()})


def check_scenario(spec: UncertaintySpec, scenario: Scenario, tol: float = 1e-9) -> None:
    for u in spec.res:
        for side in (scenario.up, scenario.down):
            values = side.get(u.source, ())
            if values and len(values) != len(u.forecast):
                raise InvalidScenarioError(f"{u.source}: expected {len(u.forecast)} slots")
            if any(v < -tol or v > 1 + tol for v in values):
                raise InvalidScenarioError(f"{u.source}: deviations must lie in [0, 1]")
        used = scenario.used_budget(u.source)
        if used > u.budget + tol:
            raise InvalidScenarioError(f"{u.source}: budget {u.budget} exceeded ({used:g})")


def materialize_uncertainty(spec: UncertaintySpec, scenario: Scenario) -> dict[str, tuple[float, ...]]:
    """Available RES output per slot under ``scenario``."""
    check_scenario(spec, scenario)
    out = {}
    for u in spec.res:
        out[u.source] = tuple(f + scenario.deviation(u.source, t) * u.max_error * f
                              for t, f in enumerate(u.forecast, start=1))
    return out


# --------------------------------------------------------------------------


def declare_switch_status(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph) -> None:
    for edge in ncg.edges:
        for t in inst.slots:
            b.binary(("w", edge.line, t))


def declare_operation(b: ModelBuilder, inst: Instance) -> None:
    """Register the second-stage variables."""
    net = inst.network
    for t in inst.slots:
        for n in net.nodes:
            b.add_var(("shed", n.id, t), lb=0, ub=n.load[t - 1], stage="second")
            b.add_var(("V", n.id, t), lb=n.v_min, ub=n.v_max, stage="second")
        for ln in net.lines:
            bound = math.inf if ln.switch is not None else None
            b.add_var(("P", ln.id, t), lb=-(bound or ln.p_max), ub=bound or ln.p_max, stage="second")
            b.add_var(("Q", ln.id, t), lb=-(bound or ln.q_max), ub=bound or ln.q_max, stage="second")
        for s in net.sources:
            b.add_var(("Pg", s.id, t), lb=0, stage="second")
            b.add_var(("Qg", s.id, t), lb=-math.inf, stage="second")
            if s.kind == "res":
                b.add_var(("Pbar", s.id, t), lb=-math.inf, stage="second")
                b.add_var(("alpha", s.id, t), lb=0, stage="second")


def emit_source_and_load_limits(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph) -> None:
    net = inst.network
    big_res = inst.horizon.big_m["res"]
    for t in inst.slots:
        for n in net.nodes:
            u = ("uNC", ncg.cell_of_node[n.id], t)
            load = n.load[t - 1]
            if load > 0:
                b.add({("shed", n.id, t): 1, u: load}, ">=", load, "II", "shed_uncleared")
        for s in net.sources:
            u = ("uNC", ncg.cell_of_node[s.node], t)
            p, q = ("Pg", s.id, t), ("Qg", s.id, t)
            qcap = s.q_max[t - 1]
            b.add({q: 1, u: -qcap}, "<=", 0, "II", "source_q")
            b.add({q: 1, u: qcap}, ">=", 0, "II", "source_q")
            if s.kind == "res":
                a, pbar = ("alpha", s.id, t), ("Pbar", s.id, t)
                b.add({p: 1, a: -1}, "<=", 0, "II", "res_output")
                b.add({a: 1, pbar: -1, u: -big_res}, ">=", -big_res, "II", "res_gate")
                b.add({a: 1, pbar: -1}, "<=", 0, "II", "res_gate")
                b.add({a: 1, u: -big_res}, "<=", 0, "II", "res_gate")
            else:
                b.add({p: 1, u: -s.p_max[t - 1]}, "<=", 0, "II", "source_p")
        for s in net.sources_of("gt"):
            rho = s.reserve_factor
            terms = {("Pg", s.id, t): 1 / rho}
            if t > 1:
                terms[("Pg", s.id, t - 1)] = -1 / rho
            if math.isfinite(s.ramp_up):
                b.add(terms, "<=", s.ramp_up, "II", "ramp")
            if math.isfinite(s.ramp_down):
                b.add(terms, ">=", -s.ramp_down, "II", "ramp")


def emit_power_flow(b: ModelBuilder, inst: Instance) -> None:
    net = inst.network
    v0 = net.nominal_voltage
    big_v = inst.horizon.big_m["voltage"]
    by_node = {n.id: [] for n in net.nodes}
    for s in net.sources:
        by_node[s.node].append(s)
    for t in inst.slots:
        for n in net.nodes:
            k = n.reactive_ratio
            p_terms = {("shed", n.id, t): 1.0}
            q_terms = {("shed", n.id, t): k}
            for s in by_node[n.id]:
                p_terms[("Pg", s.id, t)] = 1.0
                q_terms[("Qg", s.id, t)] = 1.0
            for ln in net.lines:
                if ln.to_node == n.id:
                    p_terms[("P", ln.id, t)] = p_terms.get(("P", ln.id, t), 0) + 1
                    q_terms[("Q", ln.id, t)] = q_terms.get(("Q", ln.id, t), 0) + 1
                elif ln.from_node == n.id:
                    p_terms[("P", ln.id, t)] = p_terms.get(("P", ln.id, t), 0) - 1
                    q_terms[("Q", ln.id, t)] = q_terms.get(("Q", ln.id, t), 0) - 1
            load = n.load[t - 1]
            b.add(p_terms, "==", load, "II", "balance_p")
            b.add(q_terms, "==", k * load, "II", "balance_q")
        for ln in net.lines:
            drop = {("V", ln.from_node, t): 1, ("V", ln.to_node, t): -1,
                    ("P", ln.id, t): -ln.r * 1e3 / v0, ("Q", ln.id, t): -ln.x * 1e3 / v0}
            if ln.switch is None:
                b.add(drop, "==", 0, "II", "voltage_drop")
                continue
            w = ("w", ln.id, t)
            b.add({**drop, w: big_v}, "<=", big_v, "II", "voltage_drop")
            b.add({**drop, w: -big_v}, ">=", -big_v, "II", "voltage_drop")
            for var, cap in ((("P", ln.id, t), ln.p_max), (("Q", ln.id, t), ln.q_max)):
                b.add({var: 1, w: -cap}, "<=", 0, "II", "line_capacity")
                b.add({var: 1, w: cap}, ">=", 0, "II", "line_capacity")


def emit_frr(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph) -> None:
    """Per-slot load pickup limited by the frequency response of energized DERs."""
    net = inst.network
    for t in inst.slots:
        terms: dict = {}
        rhs = 0.0
        for n in net.nodes:
            terms[("shed", n.id, t)] = -1.0
            rhs -= n.load[t - 1]
            if t > 1:
                terms[("shed", n.id, t - 1)] = 1.0
                rhs += n.load[t - 2]
        for s in net.sources:
            if s.kind in ("gt", "res") and s.frr > 0:
                u = ("uNC", ncg.cell_of_node[s.node], t)
                terms[u] = terms.get(u, 0.0) - s.rating * s.frr
        b.add(terms, "<=", rhs, "II", "frr")


def emit_radiality(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph, final_merge: bool = True) -> None:
    big = inst.horizon.big_m["commodity"]
    n_cells = len(ncg.cells)
    for t in inst.slots:
        for cell in ncg.cells:
            b.binary(("xi", cell.id, t))
        for e in ncg.edges:
            f = ("F", e.line, t)
            b.add_var(f, lb=-big, ub=big)
            b.add({f: 1, ("w", e.line, t): -big}, "<=", 0, "I", "commodity_gate")
            b.add({f: 1, ("w", e.line, t): big}, ">=", 0, "I", "commodity_gate")
        for cell in ncg.cells:
            net_in: dict = {}
            for e in ncg.edges:
                if e.b == cell.id:
                    net_in[("F", e.line, t)] = net_in.get(("F", e.line, t), 0) + 1
                if e.a == cell.id:
                    net_in[("F", e.line, t)] = net_in.get(("F", e.line, t), 0) - 1
            xi = ("xi", cell.id, t)
            b.add({**net_in, xi: big}, ">=", 1, "I", "commodity_balance")
            b.add({**net_in, xi: -big}, "<=", 1, "I", "commodity_balance")
        count = {("w", e.line, t): 1 for e in ncg.edges}
        count.update({("xi", c.id, t): 1 for c in ncg.cells})
        b.add(count, "==", n_cells, "I", "radial_count")
    if final_merge:
        t_end = inst.horizon.slots
        b.add({("xi", c.id, t_end): 1 for c in ncg.cells}, "==", 1, "I", "final_single_root")


def emit_uncertainty(b: ModelBuilder, inst: Instance) -> None:
    """Available RES output as a function of the deviation variables, plus the budget."""
    for u in inst.uncertainty.res:
        for t in inst.slots:
            b.add_var(("sp", u.source, t), lb=0, ub=1, stage="uncertainty")
            b.add_var(("sm", u.source, t), lb=0, ub=1, stage="uncertainty")
            f = u.forecast[t - 1]
            b.add({("Pbar", u.source, t): 1, ("sp", u.source, t): -u.max_error * f,
                   ("sm", u.source, t): u.max_error * f}, "==", f, "III", "res_available")
        b.add({(side, u.source, t): 1 for side in ("sp", "sm") for t in inst.slots},
              "<=", u.budget, "III", "budget")


def emit_grid_operation(b: ModelBuilder, inst: Instance, ncg: NodeCellGraph, final_merge: bool = True) -> None:
    declare_operation(b, inst)
    emit_source_and_load_limits(b, inst, ncg)
    emit_power_flow(b, inst)
    emit_frr(b, inst, ncg)
    emit_radiality(b, inst, ncg, final_merge)
    emit_uncertainty(b, inst)

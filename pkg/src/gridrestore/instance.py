"""Problem instance types and the JSON instance loader.

Canonical internal units are kW, kvar, minutes, volts and meters. Instance
files may declare other units in a ``units`` header; values are converted
while loading.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping

logger = logging.getLogger(__name__)

SWITCH_KINDS = ("MS", "RCS")
SOURCE_KINDS = ("substation", "gt", "res")
ROUTER_ROLES = ("control-centre", "rcs-ftu", "gt", "res", "substation", "relay")

_POWER_UNITS = {"W": 1e-3, "kW": 1.0, "MW": 1e3}
_LENGTH_UNITS = {"m": 1.0, "km": 1e3}
_VOLTAGE_UNITS = {"V": 1.0, "kV": 1e3}
_TIME_UNITS = {"min": 1.0, "h": 60.0}


class InstanceError(ValueError):
    """Raised when an instance document is malformed.

    ``path`` locates the offending field, e.g. ``network.lines[3].from``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float
    load: tuple[float, ...]
    critical: bool
    penalty: float
    power_factor: float
    v_min: float
    v_max: float

    @property
    def reactive_ratio(self) -> float:
        return math.tan(math.acos(self.power_factor))


@dataclass(frozen=True)
class Switch:
    id: str
    kind: str
    manual_minutes: float
    remote_minutes: float


@dataclass(frozen=True)
class Line:
    id: str
    from_node: str
    to_node: str
    r: float
    x: float
    p_max: float
    q_max: float
    switch: Switch | None = None
    damaged: bool = False
    repair_minutes: float | None = None
    site: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Source:
    id: str
    kind: str
    node: str
    p_max: tuple[float, ...]
    q_max: tuple[float, ...]
    ramp_up: float = math.inf
    ramp_down: float = math.inf
    reserve_factor: float = 1.0
    frr: float = 0.0

    @property
    def rating(self) -> float:
        return max(self.p_max)


@dataclass(frozen=True)
class PhysicalNetwork:
    nodes: tuple[Node, ...]
    lines: tuple[Line, ...]
    sources: tuple[Source, ...]
    nominal_voltage: float

    def node(self, node_id: str) -> Node:
        return self._node_index[node_id]

    def line(self, line_id: str) -> Line:
        return self._line_index[line_id]

    @cached_property
    def _node_index(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _line_index(self) -> dict[str, Line]:
        return {ln.id: ln for ln in self.lines}

    @property
    def faults(self) -> tuple[str, ...]:
        return tuple(ln.id for ln in self.lines if ln.damaged)

    @property
    def switchable(self) -> tuple[Line, ...]:
        return tuple(ln for ln in self.lines if ln.switch is not None)

    @property
    def manual_switches(self) -> tuple[str, ...]:
        return tuple(ln.switch.id for ln in self.switchable if ln.switch.kind == "MS")

    @property
    def remote_switches(self) -> tuple[str, ...]:
        return tuple(ln.switch.id for ln in self.switchable if ln.switch.kind == "RCS")

    def switch_line(self, switch_id: str) -> Line:
        for ln in self.lines:
            if ln.switch is not None and ln.switch.id == switch_id:
                return ln
        raise KeyError(switch_id)

    def sources_of(self, kind: str) -> tuple[Source, ...]:
        return tuple(s for s in self.sources if s.kind == kind)


@dataclass(frozen=True)
class Crew:
    id: str
    depot: tuple[float, float]
    durations: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CrewSpec:
    repair: tuple[Crew, ...]
    operating: tuple[Crew, ...]
    speed_kmh: float


@dataclass(frozen=True)
class Router:
    id: str
    role: str
    x: float
    y: float
    node: str | None = None
    switch: str | None = None
    power_kw: float = 0.075
    ups_minutes: float = 0.0


@dataclass(frozen=True)
class CyberNetwork:
    routers: tuple[Router, ...]
    radius: float
    hop_limit: int = 4
    links: Mapping[str, tuple[tuple[str, ...], ...]] | None = None
    # slots 1..blackout_slots have no usable cyber network at all
    blackout_slots: int = 0

    @property
    def centre(self) -> Router:
        return next(r for r in self.routers if r.role == "control-centre")

    def router(self, router_id: str) -> Router:
        return next(r for r in self.routers if r.id == router_id)

    def controller_of(self, switch_id: str) -> Router | None:
        for r in self.routers:
            if r.role == "rcs-ftu" and r.switch == switch_id:
                return r
        return None


@dataclass(frozen=True)
class ResUncertainty:
    source: str
    forecast: tuple[float, ...]
    max_error: float
    budget: float


@dataclass(frozen=True)
class UncertaintySpec:
    res: tuple[ResUncertainty, ...] = ()
    bits: int = 6

    def of(self, source_id: str) -> ResUncertainty:
        return next(u for u in self.res if u.source == source_id)


@dataclass(frozen=True)
class Horizon:
    slot_minutes: float
    slots: int
    big_time: float
    epsilon: float
    big_m: Mapping[str, float] = field(default_factory=dict)

    @property
    def minutes(self) -> float:
        return self.slot_minutes * self.slots

    def slot_start(self, t: int) -> float:
        """Start minute of 1-based slot ``t``."""
        return (t - 1) * self.slot_minutes

    @property
    def time_cap(self) -> float:
        # upper bound of every time variable
        return 2.0 * self.big_time


@dataclass(frozen=True)
class Instance:
    name: str
    network: PhysicalNetwork
    crews: CrewSpec
    cyber: CyberNetwork
    uncertainty: UncertaintySpec
    horizon: Horizon

    @property
    def slots(self) -> range:
        return range(1, self.horizon.slots + 1)

    def repair_minutes(self, fault: str, crew: Crew) -> float:
        if fault in crew.durations:
            return float(crew.durations[fault])
        return float(self.network.line(fault).repair_minutes)

    def manual_minutes(self, switch: str, crew: Crew) -> float:
        if switch in crew.durations:
            return float(crew.durations[switch])
        return float(self.network.switch_line(switch).switch.manual_minutes)

    def task_site(self, task: str) -> tuple[float, float]:
        if task in {ln.id for ln in self.network.lines}:
            return self.network.line(task).site
        return self.network.switch_line(task).site

    @property
    def operating_tasks(self) -> tuple[str, ...]:
        """Switches an operating crew may visit: every MS and every RCS."""
        return tuple(ln.switch.id for ln in self.network.switchable)

    def total_load(self) -> float:
        return sum(max(n.load) for n in self.network.nodes)

    def with_changes(self, **sections: Any) -> "Instance":
        """Copy with whole sections replaced; big-M values are recomputed."""
        inst = replace(self, **sections)
        return replace(inst, horizon=_finish_horizon(inst, inst.horizon))


# --------------------------------------------------------------------------
# loading


def load_instance(document: str | Mapping[str, Any] | Path) -> Instance:
    """Parse and validate an instance from JSON text, a mapping or a path."""
    if isinstance(document, Path):
        raw = json.loads(document.read_text())
    elif isinstance(document, str):
        raw = json.loads(document)
    else:
        raw = document
    return _Loader(raw).load()


def dump_instance(inst: Instance) -> dict[str, Any]:
    """Inverse of :func:`load_instance` (canonical units)."""
    net = inst.network

    def node_doc(n: Node) -> dict:
        return {"id": n.id, "x": n.x, "y": n.y, "load": list(n.load), "critical": n.critical,
                "penalty": n.penalty, "power_factor": n.power_factor, "v_min": n.v_min, "v_max": n.v_max}

    def line_doc(ln: Line) -> dict:
        doc = {"id": ln.id, "from": ln.from_node, "to": ln.to_node, "r": ln.r, "x": ln.x,
               "p_max": ln.p_max, "q_max": ln.q_max, "damaged": ln.damaged, "site": list(ln.site)}
        if ln.repair_minutes is not None:
            doc["repair_minutes"] = ln.repair_minutes
        if ln.switch is not None:
            doc["switch"] = {"id": ln.switch.id, "type": ln.switch.kind,
                             "manual_minutes": ln.switch.manual_minutes,
                             "remote_minutes": ln.switch.remote_minutes}
        return doc

    def source_doc(s: Source) -> dict:
        doc = {"id": s.id, "kind": s.kind, "node": s.node, "p_max": list(s.p_max), "q_max": list(s.q_max),
               "reserve_factor": s.reserve_factor, "frr": s.frr}
        if math.isfinite(s.ramp_up):
            doc["ramp_up"] = s.ramp_up
        if math.isfinite(s.ramp_down):
            doc["ramp_down"] = s.ramp_down
        return doc

    def crew_doc(c: Crew) -> dict:
        return {"id": c.id, "depot": list(c.depot), "durations": dict(c.durations)}

    def router_doc(r: Router) -> dict:
        doc = {"id": r.id, "role": r.role, "x": r.x, "y": r.y, "power_kw": r.power_kw,
               "ups_minutes": r.ups_minutes}
        if r.node is not None:
            doc["node"] = r.node
        if r.switch is not None:
            doc["switch"] = r.switch
        return doc

    cyber: dict[str, Any] = {"radius": inst.cyber.radius, "hop_limit": inst.cyber.hop_limit,
                             "blackout_slots": inst.cyber.blackout_slots,
                             "routers": [router_doc(r) for r in inst.cyber.routers]}
    if inst.cyber.links is not None:
        cyber["links"] = {k: [list(p) for p in v] for k, v in inst.cyber.links.items()}
    return {
        "name": inst.name,
        "units": {"power": "kW", "length": "m", "voltage": "V", "time": "min"},
        "network": {"nominal_voltage": net.nominal_voltage,
                    "nodes": [node_doc(n) for n in net.nodes],
                    "lines": [line_doc(ln) for ln in net.lines],
                    "sources": [source_doc(s) for s in net.sources]},
        "crews": {"speed_kmh": inst.crews.speed_kmh,
                  "repair": [crew_doc(c) for c in inst.crews.repair],
                  "operating": [crew_doc(c) for c in inst.crews.operating]},
        "cyber": cyber,
        "uncertainty": {"bits": inst.uncertainty.bits,
                        "res": {u.source: {"forecast": list(u.forecast), "max_error": u.max_error,
                                           "budget": u.budget} for u in inst.uncertainty.res}},
        "horizon": {"slot_minutes": inst.horizon.slot_minutes, "slots": inst.horizon.slots,
                    "big_time": inst.horizon.big_time},
        "costs": {},
    }


_TOP = {"name", "units", "network", "crews", "cyber", "uncertainty", "horizon", "costs"}


class _Loader:
    def __init__(self, raw: Mapping[str, Any]):
        self.raw = raw

    # -- helpers
    def _obj(self, value: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> Mapping:
        if not isinstance(value, Mapping):
            raise InstanceError(path, "expected an object")
        unknown = set(value) - allowed
        if unknown:
            raise InstanceError(f"{path}.{sorted(unknown)[0]}", "unknown field")
        for key in sorted(required):
            if key not in value:
                raise InstanceError(f"{path}.{key}", "missing required field")
        return value

    def _num(self, value: Any, path: str, *, minimum: float | None = 0.0, positive: bool = False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InstanceError(path, f"expected a number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise InstanceError(path, "NaN is not allowed")
        if positive and value <= 0:
            raise InstanceError(path, f"must be positive, got {value}")
        if minimum is not None and value < minimum:
            raise InstanceError(path, f"must be >= {minimum}, got {value}")
        return value

    def _series(self, value: Any, path: str, n: int, scale: float) -> tuple[float, ...]:
        if isinstance(value, list):
            if len(value) != n:
                raise InstanceError(path, f"expected {n} per-slot values, got {len(value)}")
            return tuple(self._num(v, f"{path}[{k}]") * scale for k, v in enumerate(value))
        return (self._num(value, path) * scale,) * n

    def _point(self, value: Any, path: str) -> tuple[float, float]:
        if not (isinstance(value, list) and len(value) == 2):
            raise InstanceError(path, "expected [x, y]")
        return (self._num(value[0], f"{path}[0]", minimum=None) * self.len_scale,
                self._num(value[1], f"{path}[1]", minimum=None) * self.len_scale)

    @staticmethod
    def _unique(items: list, path: str, what: str) -> None:
        seen: set[str] = set()
        for k, item in enumerate(items):
            if item.id in seen:
                raise InstanceError(f"{path}[{k}].id", f"duplicate {what} id {item.id!r}")
            seen.add(item.id)

    # -- sections
    def load(self) -> Instance:
        raw = self._obj(self.raw, "$", _TOP, {"network", "crews", "horizon"})
        units = self._obj(raw.get("units", {}), "units", {"power", "length", "voltage", "time"})
        try:
            self.p_scale = _POWER_UNITS[units.get("power", "kW")]
            self.len_scale = _LENGTH_UNITS[units.get("length", "m")]
            self.v_scale = _VOLTAGE_UNITS[units.get("voltage", "V")]
            self.t_scale = _TIME_UNITS[units.get("time", "min")]
        except KeyError as exc:
            raise InstanceError("units", f"unsupported unit {exc.args[0]!r}") from None
        costs = self._obj(raw.get("costs", {}), "costs", {"common_penalty", "critical_penalty"})
        self.common_penalty = self._num(costs.get("common_penalty", 14.0), "costs.common_penalty", positive=True)
        self.critical_penalty = self._num(costs.get("critical_penalty", 1000.0), "costs.critical_penalty",
                                          positive=True)

        hz = self._obj(raw["horizon"], "horizon", {"slot_minutes", "slots", "big_time", "epsilon"},
                       {"slot_minutes", "slots"})
        slot_minutes = self._num(hz["slot_minutes"], "horizon.slot_minutes", positive=True) * self.t_scale
        slots = hz["slots"]
        if not isinstance(slots, int) or isinstance(slots, bool) or slots < 1:
            raise InstanceError("horizon.slots", "expected a positive integer")
        self.n_slots = slots

        network = self._network(raw["network"])
        crews = self._crews(raw["crews"], network)
        cyber = self._cyber(raw.get("cyber", {"radius": 1000.0, "routers": []}), network)
        uncertainty = self._uncertainty(raw.get("uncertainty", {}), network)

        big_time = hz.get("big_time")
        if big_time is not None:
            big_time = self._num(big_time, "horizon.big_time", positive=True) * self.t_scale
        epsilon = hz.get("epsilon")
        if epsilon is not None:
            epsilon = self._num(epsilon, "horizon.epsilon", positive=True) * self.t_scale
        else:
            epsilon = slot_minutes * 1e-3
        if not 0 < epsilon < slot_minutes:
            raise InstanceError("horizon.epsilon", "must lie strictly between 0 and the slot length")
        horizon = Horizon(slot_minutes, slots, big_time or 0.0, epsilon)
        inst = Instance(str(raw.get("name", "instance")), network, crews, cyber, uncertainty, horizon)
        if big_time is not None and big_time < slots * slot_minutes:
            raise InstanceError("horizon.big_time", "must be at least slots * slot_minutes")
        inst = _apply_epsilon_rule(inst)
        return replace(inst, horizon=_finish_horizon(inst, inst.horizon, explicit_big_time=big_time))

    def _network(self, raw: Any) -> PhysicalNetwork:
        raw = self._obj(raw, "network", {"nominal_voltage", "voltage_min", "voltage_max", "power_factor",
                                         "nodes", "lines", "sources"}, {"nodes", "lines"})
        v0 = self._num(raw.get("nominal_voltage", 4160.0), "network.nominal_voltage", positive=True) * self.v_scale
        vmin = self._num(raw.get("voltage_min", 0.95 * v0 / self.v_scale), "network.voltage_min") * self.v_scale
        vmax = self._num(raw.get("voltage_max", 1.05 * v0 / self.v_scale), "network.voltage_max") * self.v_scale
        pf = self._num(raw.get("power_factor", 0.95), "network.power_factor", positive=True)
        if pf > 1:
            raise InstanceError("network.power_factor", "must not exceed 1")

        nodes = []
        for k, nd in enumerate(raw["nodes"]):
            p = f"network.nodes[{k}]"
            nd = self._obj(nd, p, {"id", "x", "y", "load", "critical", "penalty", "power_factor",
                                   "v_min", "v_max"}, {"id"})
            critical = bool(nd.get("critical", False))
            default_pen = self.critical_penalty if critical else self.common_penalty
            node_pf = self._num(nd.get("power_factor", pf), f"{p}.power_factor", positive=True)
            if node_pf > 1:
                raise InstanceError(f"{p}.power_factor", "must not exceed 1")
            nodes.append(Node(
                id=str(nd["id"]),
                x=self._num(nd.get("x", 0.0), f"{p}.x", minimum=None) * self.len_scale,
                y=self._num(nd.get("y", 0.0), f"{p}.y", minimum=None) * self.len_scale,
                load=self._series(nd.get("load", 0.0), f"{p}.load", self.n_slots, self.p_scale),
                critical=critical,
                penalty=self._num(nd.get("penalty", default_pen), f"{p}.penalty", positive=True),
                power_factor=node_pf,
                v_min=self._num(nd.get("v_min", vmin / self.v_scale), f"{p}.v_min") * self.v_scale,
                v_max=self._num(nd.get("v_max", vmax / self.v_scale), f"{p}.v_max") * self.v_scale,
            ))
        self._unique(nodes, "network.nodes", "node")
        node_ids = {n.id for n in nodes}
        coords = {n.id: (n.x, n.y) for n in nodes}

        lines = []
        switch_ids: set[str] = set()
        for k, ln in enumerate(raw["lines"]):
            p = f"network.lines[{k}]"
            ln = self._obj(ln, p, {"id", "from", "to", "r", "x", "p_max", "q_max", "switch", "damaged",
                                   "repair_minutes", "site"}, {"id", "from", "to"})
            for end in ("from", "to"):
                if str(ln[end]) not in node_ids:
                    raise InstanceError(f"{p}.{end}", f"unknown node {ln[end]!r}")
            if str(ln["from"]) == str(ln["to"]):
                raise InstanceError(f"{p}.to", "line endpoints must differ")
            switch = None
            if ln.get("switch") is not None:
                sw = self._obj(ln["switch"], f"{p}.switch", {"id", "type", "manual_minutes", "remote_minutes"},
                               {"id", "type"})
                if sw["type"] not in SWITCH_KINDS:
                    raise InstanceError(f"{p}.switch.type", f"expected one of {SWITCH_KINDS}")
                if "manual_minutes" not in sw:
                    raise InstanceError(f"{p}.switch.manual_minutes", "manual operation duration is required")
                sid = str(sw["id"])
                if sid in switch_ids:
                    raise InstanceError(f"{p}.switch.id", f"duplicate switch id {sid!r}")
                switch_ids.add(sid)
                switch = Switch(
                    id=sid, kind=sw["type"],
                    manual_minutes=self._num(sw["manual_minutes"], f"{p}.switch.manual_minutes",
                                             positive=True) * self.t_scale,
                    remote_minutes=self._num(sw.get("remote_minutes", 2.0), f"{p}.switch.remote_minutes",
                                             positive=True) * self.t_scale,
                )
            damaged = bool(ln.get("damaged", False))
            repair = None
            if damaged:
                if "repair_minutes" not in ln:
                    raise InstanceError(f"{p}.repair_minutes", "damaged lines need a repair duration")
                repair = self._num(ln["repair_minutes"], f"{p}.repair_minutes", positive=True) * self.t_scale
            a, b = coords[str(ln["from"])], coords[str(ln["to"])]
            site = self._point(ln["site"], f"{p}.site") if "site" in ln else ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
            lines.append(Line(
                id=str(ln["id"]), from_node=str(ln["from"]), to_node=str(ln["to"]),
                r=self._num(ln.get("r", 0.0), f"{p}.r"), x=self._num(ln.get("x", 0.0), f"{p}.x"),
                p_max=self._num(ln.get("p_max", 1e4 / self.p_scale), f"{p}.p_max") * self.p_scale,
                q_max=self._num(ln.get("q_max", 1e4 / self.p_scale), f"{p}.q_max") * self.p_scale,
                switch=switch, damaged=damaged, repair_minutes=repair, site=site,
            ))
        self._unique(lines, "network.lines", "line")
        clash = switch_ids & {ln.id for ln in lines}
        if clash:
            raise InstanceError("network.lines", f"switch id {sorted(clash)[0]!r} collides with a line id")

        sources = []
        for k, src in enumerate(raw.get("sources", [])):
            p = f"network.sources[{k}]"
            src = self._obj(src, p, {"id", "kind", "node", "p_max", "q_max", "ramp_up", "ramp_down",
                                     "reserve_factor", "frr"}, {"id", "kind", "node", "p_max"})
            if src["kind"] not in SOURCE_KINDS:
                raise InstanceError(f"{p}.kind", f"expected one of {SOURCE_KINDS}")
            if str(src["node"]) not in node_ids:
                raise InstanceError(f"{p}.node", f"unknown node {src['node']!r}")
            p_max = self._series(src["p_max"], f"{p}.p_max", self.n_slots, self.p_scale)
            sources.append(Source(
                id=str(src["id"]), kind=src["kind"], node=str(src["node"]), p_max=p_max,
                q_max=self._series(src.get("q_max", 0.5 * max(p_max) / self.p_scale), f"{p}.q_max",
                                   self.n_slots, self.p_scale),
                ramp_up=self._num(src.get("ramp_up", math.inf), f"{p}.ramp_up") * self.p_scale,
                ramp_down=self._num(src.get("ramp_down", math.inf), f"{p}.ramp_down") * self.p_scale,
                reserve_factor=self._num(src.get("reserve_factor", 1.0), f"{p}.reserve_factor", positive=True),
                frr=self._num(src.get("frr", 0.0), f"{p}.frr"),
            ))
        self._unique(sources, "network.sources", "source")
        return PhysicalNetwork(tuple(nodes), tuple(lines), tuple(sources), v0)

    def _crews(self, raw: Any, net: PhysicalNetwork) -> CrewSpec:
        raw = self._obj(raw, "crews", {"speed_kmh", "repair", "operating"}, {"speed_kmh"})
        speed = self._num(raw["speed_kmh"], "crews.speed_kmh", positive=True)
        tasks = set(net.faults) | {ln.switch.id for ln in net.switchable}

        def crew_list(key: str) -> tuple[Crew, ...]:
            out = []
            for k, c in enumerate(raw.get(key, [])):
                p = f"crews.{key}[{k}]"
                c = self._obj(c, p, {"id", "depot", "durations"}, {"id", "depot"})
                durations = {}
                for task, minutes in self._obj(c.get("durations", {}), f"{p}.durations", tasks).items():
                    durations[str(task)] = self._num(minutes, f"{p}.durations.{task}", positive=True) * self.t_scale
                out.append(Crew(str(c["id"]), self._point(c["depot"], f"{p}.depot"), durations))
            self._unique(out, f"crews.{key}", "crew")
            return tuple(out)

        repair, operating = crew_list("repair"), crew_list("operating")
        if net.faults and not repair:
            raise InstanceError("crews.repair", "damaged lines exist but no repair crew is defined")
        clash = {c.id for c in repair} & {c.id for c in operating}
        if clash:
            raise InstanceError("crews.operating", f"crew id {sorted(clash)[0]!r} used twice")
        return CrewSpec(repair, operating, speed)

    def _cyber(self, raw: Any, net: PhysicalNetwork) -> CyberNetwork:
        raw = self._obj(raw, "cyber", {"radius", "hop_limit", "routers", "links", "blackout_slots"}, {"radius"})
        radius = self._num(raw["radius"], "cyber.radius", positive=True) * self.len_scale
        hop_limit = raw.get("hop_limit", 4)
        if not isinstance(hop_limit, int) or hop_limit < 1:
            raise InstanceError("cyber.hop_limit", "expected an integer >= 1")
        blackout = raw.get("blackout_slots", 0)
        if not isinstance(blackout, int) or blackout < 0:
            raise InstanceError("cyber.blackout_slots", "expected a non-negative integer")
        node_ids = {n.id for n in net.nodes}
        rcs = set(net.remote_switches)
        routers = []
        for k, r in enumerate(raw.get("routers", [])):
            p = f"cyber.routers[{k}]"
            r = self._obj(r, p, {"id", "role", "x", "y", "node", "switch", "power_kw", "ups_minutes"},
                          {"id", "role"})
            if r["role"] not in ROUTER_ROLES:
                raise InstanceError(f"{p}.role", f"expected one of {ROUTER_ROLES}")
            node = r.get("node")
            if node is not None and str(node) not in node_ids:
                raise InstanceError(f"{p}.node", f"unknown node {node!r}")
            if r["role"] != "control-centre" and node is None:
                raise InstanceError(f"{p}.node", "routers other than the control centre need a power node")
            switch = r.get("switch")
            if r["role"] == "rcs-ftu":
                if switch is None or str(switch) not in rcs:
                    raise InstanceError(f"{p}.switch", f"unknown remote-controlled switch {switch!r}")
            elif switch is not None:
                raise InstanceError(f"{p}.switch", "only rcs-ftu routers control a switch")
            if "x" in r:
                x = self._num(r["x"], f"{p}.x", minimum=None) * self.len_scale
                y = self._num(r.get("y", 0.0), f"{p}.y", minimum=None) * self.len_scale
            elif node is not None:
                nd = net.node(str(node))
                x, y = nd.x, nd.y
            else:
                raise InstanceError(f"{p}.x", "coordinates are required without a power node")
            routers.append(Router(
                id=str(r["id"]), role=r["role"], x=x, y=y, node=None if node is None else str(node),
                switch=None if switch is None else str(switch),
                power_kw=self._num(r.get("power_kw", 0.075), f"{p}.power_kw") * self.p_scale,
                ups_minutes=self._num(r.get("ups_minutes", 0.0), f"{p}.ups_minutes") * self.t_scale,
            ))
        self._unique(routers, "cyber.routers", "router")
        centres = [r for r in routers if r.role == "control-centre"]
        if routers and len(centres) != 1:
            raise InstanceError("cyber.routers", f"exactly one control-centre required, found {len(centres)}")
        controlled = [r.switch for r in routers if r.role == "rcs-ftu"]
        if len(controlled) != len(set(controlled)):
            raise InstanceError("cyber.routers", "an RCS is controlled by more than one router")

        links = None
        if "links" in raw:
            ids = {r.id for r in routers}
            centre = centres[0].id if centres else None
            links = {}
            lk = self._obj(raw["links"], "cyber.links", ids)
            for rid, paths in lk.items():
                out = []
                for k, path in enumerate(paths):
                    p = f"cyber.links.{rid}[{k}]"
                    path = tuple(str(v) for v in path)
                    for v in path:
                        if v not in ids:
                            raise InstanceError(p, f"unknown router {v!r}")
                    if len(path) < 2 or path[0] != rid or path[-1] != centre:
                        raise InstanceError(p, "a link must start at its router and end at the control centre")
                    out.append(path)
                links[rid] = tuple(out)
        return CyberNetwork(tuple(routers), radius, hop_limit, links, blackout)

    def _uncertainty(self, raw: Any, net: PhysicalNetwork) -> UncertaintySpec:
        raw = self._obj(raw, "uncertainty", {"bits", "res"})
        bits = raw.get("bits", 6)
        if not isinstance(bits, int) or bits < 0:
            raise InstanceError("uncertainty.bits", "expected a non-negative integer")
        res_sources = {s.id: s for s in net.sources if s.kind == "res"}
        given = self._obj(raw.get("res", {}), "uncertainty.res", set(res_sources))
        out = []
        for sid, src in res_sources.items():
            p = f"uncertainty.res.{sid}"
            spec = self._obj(given.get(sid, {}), p, {"forecast", "max_error", "budget"})
            forecast = self._series(spec.get("forecast", list(src.p_max)) if "forecast" in spec
                                    else [v / self.p_scale for v in src.p_max], f"{p}.forecast",
                                    self.n_slots, self.p_scale)
            omega = self._num(spec.get("max_error", 0.0), f"{p}.max_error")
            if omega > 1:
                raise InstanceError(f"{p}.max_error", "must lie in [0, 1]")
            budget = self._num(spec.get("budget", 0.0), f"{p}.budget")
            if budget > 2 * self.n_slots:
                raise InstanceError(f"{p}.budget", "exceeds 2 * slots; the budget would be inactive")
            out.append(ResUncertainty(sid, forecast, omega, budget))
        return UncertaintySpec(tuple(out), bits)


def _apply_epsilon_rule(inst: Instance) -> Instance:
    """Push single-leg repair completions off the (b, b + eps] band after a slot boundary.

    The linearized status timelines cannot tell a completion in that band from one exactly
    on the boundary, so the offending repair duration is lengthened by 2 * eps.
    """
    from .network import travel_minutes

    hz = inst.horizon
    eps = hz.epsilon if hz.epsilon else hz.slot_minutes * 1e-3
    lines = list(inst.network.lines)
    changed = False
    for k, ln in enumerate(lines):
        if not ln.damaged:
            continue
        for crew in inst.crews.repair:
            done = travel_minutes(crew.depot, ln.site, inst.crews.speed_kmh) + inst.repair_minutes(ln.id, crew)
            offset = done % hz.slot_minutes
            if 0 < offset <= eps:
                logger.warning("repair of %s by %s ends %.4g min after a slot boundary; "
                               "lengthening its duration by %.4g min", ln.id, crew.id, offset, 2 * eps)
                lines[k] = ln = replace(ln, repair_minutes=ln.repair_minutes + 2 * eps)
                changed = True
    if not changed:
        return inst
    return replace(inst, network=replace(inst.network, lines=tuple(lines)))


def _finish_horizon(inst: Instance, hz: Horizon, explicit_big_time: float | None = None) -> Horizon:
    """Fill in T_MAX (when not given) and the per-family big-M registry."""
    from .network import reduce_network, travel_minutes

    net = inst.network
    eps = hz.epsilon if hz.epsilon else hz.slot_minutes * 1e-3
    big_time = explicit_big_time if explicit_big_time is not None else hz.big_time
    if not big_time:
        sites = [inst.task_site(t) for t in net.faults + inst.operating_tasks]
        sites += [c.depot for c in inst.crews.repair + inst.crews.operating]
        longest = 0.0
        for a in sites:
            for b in sites:
                longest = max(longest, travel_minutes(a, b, inst.crews.speed_kmh))
        work = sum(max([inst.repair_minutes(f, c) for c in inst.crews.repair] or [0.0]) for f in net.faults)
        work += sum(max([inst.manual_minutes(s, c) for c in inst.crews.operating] or
                        [net.switch_line(s).switch.manual_minutes]) for s in inst.operating_tasks)
        n_tasks = len(net.faults) + len(inst.operating_tasks)
        big_time = hz.slots * hz.slot_minutes + work + (n_tasks + 1) * longest + hz.slot_minutes
    total_load = inst.total_load()
    max_drop = 0.0
    for ln in net.lines:
        max_drop = max(max_drop, (ln.r * ln.p_max + ln.x * ln.q_max) * 1e3 / net.nominal_voltage)
    v_span = max([n.v_max for n in net.nodes] or [0.0]) - min([n.v_min for n in net.nodes] or [0.0])
    res_peak = 0.0
    for u in inst.uncertainty.res:
        res_peak = max(res_peak, max(u.forecast) * (1 + u.max_error))
    n_cells = len(reduce_network(net).cells) if net.nodes else 1
    big_m = {
        "routing": 3.0 * big_time,
        "status": 2.0 * big_time + hz.slots * hz.slot_minutes,
        "commodity": float(n_cells),
        "power_dependency": max(10.0 * total_load, 1.0),
        "voltage": v_span + max_drop,
        "res": max(res_peak, 1.0),
        # a binary bounded by a sum of binaries needs no larger constant
        "link": 1.0,
    }
    return replace(hz, big_time=big_time, epsilon=eps, big_m=big_m)

"""Schedule reports: crew itineraries, per-slot milestones and plot-ready series.

Reports hold no wall-clock data so two runs on the same input give the same
bytes. Timings go to a separate trace file.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

from .ccg import SolveReport
from .grid import Scenario
from .instance import Instance
from .network import reduce_network
from .validate import ValidationResult, validate_schedule

DIGITS = 6


def _clean(value: Any) -> Any:
    """Round floats and turn tuples into lists, recursively."""
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        out = round(value, DIGITS)
        return 0.0 if out == 0 else out
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def slot_series(inst: Instance, check: ValidationResult) -> list[dict]:
    """Restored critical-load fraction and cumulative shedding cost per slot."""
    hours = inst.horizon.slot_minutes / 60.0
    nodes = inst.network.nodes
    shed = check.operation["shed"] if check.operation else {}
    rows, total = [], 0.0
    for t in inst.slots:
        crit = sum(n.load[t - 1] for n in nodes if n.critical)
        served = sum(n.load[t - 1] - shed.get((n.id, t), n.load[t - 1]) for n in nodes if n.critical)
        total += sum(n.penalty * shed.get((n.id, t), n.load[t - 1]) * hours for n in nodes)
        rows.append({"slot": t, "minute": inst.horizon.slot_start(t),
                     "restored_critical_fraction": served / crit if crit > 0 else 1.0,
                     "cumulative_cost": total})
    return rows


def milestones(inst: Instance, solve: SolveReport) -> list[dict]:
    """Per-slot changes: cells energized or lost, switches closed and by what."""
    x = solve.schedule
    ncg = reduce_network(inst.network)
    out = []
    for t in inst.slots:
        events = []
        for cell in ncg.cells:
            now, before = x.flag(("uNC", cell.id, t)), x.flag(("uNC", cell.id, t - 1)) if t > 1 else 0
            if now != before:
                events.append({"event": "energized" if now else "de-energized", "cell": cell.id})
        for edge in ncg.edges:
            now = x.flag(("w", edge.line, t))
            before = x.flag(("w", edge.line, t - 1)) if t > 1 else 0
            if now and not before:
                remote = x.flag(("wRCS", edge.line, t))
                ev = {"event": "closed", "switch": edge.switch, "line": edge.line,
                      "mode": "remote" if remote else "manual"}
                if remote:
                    ev["router"] = inst.cyber.controller_of(edge.switch).id
                events.append(ev)
        for r in inst.cyber.routers:
            if r.role == "control-centre":
                continue
            now = x.flag(("uC", r.id, t))
            before = x.flag(("uC", r.id, t - 1)) if t > 1 else 0
            if now != before:
                events.append({"event": "router-up" if now else "router-down", "router": r.id})
        if events:
            out.append({"slot": t, "minute": inst.horizon.slot_start(t), "events": events})
    return out


def final_topology(inst: Instance, solve: SolveReport) -> list[str]:
    ncg = reduce_network(inst.network)
    T = inst.horizon.slots
    closed = [ln.id for ln in inst.network.lines if ln.switch is None]
    closed += [e.line for e in ncg.edges if solve.schedule.flag(("w", e.line, T))]
    return sorted(closed)


def build_report(inst: Instance, solve: SolveReport, check: ValidationResult | None = None) -> dict:
    """Machine-readable schedule report; ``check`` is recomputed when omitted."""
    worst = solve.worst_scenario or Scenario.zero(inst.uncertainty, inst.horizon.slots)
    check = check or validate_schedule(inst, solve.schedule, worst)
    doc = {
        "instance": inst.name,
        "status": solve.status,
        "objective": solve.objective,
        "lower_bound": solve.lower_bound,
        "upper_bound": solve.upper_bound,
        "gap": solve.gap,
        "iterations": solve.iterations,
        "validated": {"feasible": check.feasible, "objective": check.objective,
                      "violations": [str(v) for v in check.violations]},
        "itineraries": check.timeline.itineraries,
        "milestones": milestones(inst, solve),
        "series": slot_series(inst, check),
        "worst_scenario": worst.to_dict(),
        "topology": final_topology(inst, solve),
        "trace": solve.trace,
        "model_sizes": solve.model_sizes,
        "schedule": solve.schedule.to_dict(),
    }
    return _clean(doc)


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def series_csv(doc: dict) -> str:
    buf = io.StringIO()
    fields = ["slot", "minute", "restored_critical_fraction", "cumulative_cost"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in doc["series"]:
        writer.writerow({k: row[k] for k in fields})
    return buf.getvalue()


def summary(doc: dict) -> str:
    lines = [f"instance {doc['instance']}: {doc['status']} after {doc['iterations']} iteration(s)",
             f"objective {doc['objective']}  (LB {doc['lower_bound']}, gap {doc['gap']})",
             f"validator: {'feasible' if doc['validated']['feasible'] else 'INFEASIBLE'}, "
             f"objective {doc['validated']['objective']}"]
    for crew, stops in sorted(doc["itineraries"].items()):
        path = ", ".join(f"{s['task']} ({s['arrive']:.0f}-{s['leave']:.0f})" for s in stops) or "idle"
        lines.append(f"  {crew}: {path}")
    return "\n".join(lines) + "\n"


def write_artifacts(out_dir: Path, doc: dict, timings: list[dict]) -> list[Path]:
    """Write everything to temporary names first, then move them in place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": dumps(doc),
        "series.csv": series_csv(doc),
        "summary.txt": summary(doc),
        "trace.json": json.dumps({"trace": doc["trace"], "timings": timings}, sort_keys=True, indent=2) + "\n",
    }
    staged = []
    for name, text in files.items():
        tmp = out_dir / f".{name}.tmp"
        tmp.write_text(text)
        staged.append((tmp, out_dir / name))
    for tmp, final in staged:
        tmp.replace(final)
    return [final for _, final in staged]

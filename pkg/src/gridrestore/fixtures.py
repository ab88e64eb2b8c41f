"""Seeded generator of small radial instances that the brute-force oracle accepts."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .instance import Instance, load_instance

SHIPPED = {"desk": "desk.json", "anchors": "anchors.json", "res-island": "res_island.json"}


def load_fixture(name: str) -> Instance:
    """A shipped instance by short name, or any instance file by path."""
    if name in SHIPPED:
        text = resources.files("gridrestore").joinpath("data", SHIPPED[name]).read_text()
        return load_instance(json.loads(text))
    return load_instance(Path(name))


def random_capped(seed: int, slots: int = 7, budget: int = 1, faults: int = 2, switches: int = 2,
                  remote: bool = True, omega: float = 0.3) -> Instance:
    """A feeder of ``switches + 1`` cells in a tree, each cell a short chain of nodes.

    Cell 0 holds the substation. Faults sit on lines inside the cells, switches join
    the cells. One PV unit carries the forecast error; with ``remote`` the first switch
    is remote-controlled behind an FTU router.
    """
    rng = np.random.default_rng(seed)
    n_cells = switches + 1
    nodes, lines, routers = [], [], []
    cell_nodes: list[list[str]] = []
    inner: list[str] = []
    k = 0
    for c in range(n_cells):
        size = 2 if c == 0 or len(inner) < faults else int(rng.integers(1, 3))
        ids = []
        for _ in range(size):
            k += 1
            nid = f"N{k}"
            x = float(rng.integers(0, 9) * 100)
            y = float(rng.integers(0, 9) * 100)
            nodes.append({"id": nid, "x": x, "y": y, "load": int(rng.integers(2, 9) * 10),
                          "critical": bool(rng.random() < 0.3)})
            if ids:
                lid = f"L{len(lines) + 1}"
                lines.append({"id": lid, "from": ids[-1], "to": nid, "r": 0.05, "x": 0.05})
                if c > 0:
                    inner.append(lid)
            ids.append(nid)
        cell_nodes.append(ids)
    # the substation cell has no fault so the feeder head stays energized
    for lid in rng.permutation(inner)[:faults]:
        ln = next(ln for ln in lines if ln["id"] == lid)
        ln["damaged"] = True
        ln["repair_minutes"] = int(rng.integers(2, 7) * 10)
    for c in range(1, n_cells):
        parent = int(rng.integers(0, c))
        kind = "RCS" if remote and c == 1 else "MS"
        sw = {"id": f"{kind}{c}", "type": kind, "manual_minutes": 10}
        if kind == "RCS":
            sw["remote_minutes"] = 2
        lines.append({"id": f"L{len(lines) + 1}", "from": cell_nodes[parent][-1], "to": cell_nodes[c][0],
                      "r": 0.05, "x": 0.05, "switch": sw})
        if kind == "RCS":
            routers.append({"id": f"F{c}", "role": "rcs-ftu", "node": cell_nodes[c][0], "switch": sw["id"],
                            "ups_minutes": 60})
    pv_node = cell_nodes[-1][-1]
    forecast = [int(v) for v in rng.integers(2, 6, size=slots) * 10]
    doc = {
        "name": f"capped-{seed}",
        "units": {"power": "kW", "length": "m", "voltage": "kV", "time": "min"},
        "network": {
            "nominal_voltage": 4.16,
            "nodes": nodes,
            "lines": lines,
            "sources": [
                {"id": "SUB", "kind": "substation", "node": cell_nodes[0][0], "p_max": 2000, "q_max": 1000},
                {"id": "PV1", "kind": "res", "node": pv_node, "p_max": 60, "q_max": 30, "frr": 0.5},
            ],
        },
        "crews": {
            "speed_kmh": 5,
            "repair": [{"id": "RC1", "depot": [0, 0]}],
            "operating": [{"id": "OC1", "depot": [0, 0]}],
        },
        "cyber": {"radius": 1500, "routers": [{"id": "CC", "role": "control-centre", "x": 0, "y": 0}] + routers},
        "uncertainty": {"bits": 6, "res": {"PV1": {"forecast": forecast, "max_error": omega, "budget": budget}}},
        "horizon": {"slot_minutes": 30, "slots": slots},
    }
    return load_instance(doc)

"""Small hand-built instances shared by the module tests."""
from gridrestore import load_instance


def island_doc(slots=2, budget=1, omega=0.3, forecast=None, penalty_scale=1.0, load_scale=1.0):
    """Three-node feeder: a weak substation, one damaged line and a PV unit behind it."""
    fc = forecast or [100 + 10 * t for t in range(slots)]
    common, critical = 14.0 * penalty_scale, 1000.0 * penalty_scale
    return {
        "name": "island",
        "network": {
            "nodes": [{"id": "N1", "x": 0, "y": 0, "load": 40 * load_scale, "penalty": common},
                      {"id": "N2", "x": 300, "y": 0, "load": 60 * load_scale, "penalty": common},
                      {"id": "N3", "x": 600, "y": 0, "load": 100 * load_scale, "critical": True,
                       "penalty": critical}],
            "lines": [{"id": "L1", "from": "N1", "to": "N2", "r": 0.05, "x": 0.05, "damaged": True,
                       "repair_minutes": 40},
                      {"id": "L2", "from": "N2", "to": "N3", "r": 0.05, "x": 0.05}],
            "sources": [{"id": "SUB", "kind": "substation", "node": "N1", "p_max": 30, "q_max": 100},
                        {"id": "PV1", "kind": "res", "node": "N2", "p_max": 150, "q_max": 80, "frr": 1.0}],
        },
        "crews": {"speed_kmh": 5, "repair": [{"id": "RC1", "depot": [150, 500]}], "operating": []},
        "uncertainty": {"bits": 2, "res": {"PV1": {"forecast": fc, "max_error": omega, "budget": budget}}},
        "horizon": {"slot_minutes": 30, "slots": slots},
    }


def island(**kw):
    return load_instance(island_doc(**kw))
